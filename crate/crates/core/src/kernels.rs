//! Invariant integral operators: point-pair kernels, the automorphic kernel
//! `K`, its principal parts `H_a` and compact part `K̂`, quadrature grids on
//! the fundamental domain, Hilbert–Schmidt and spectrum probes, and the
//! resolvent `R_s`.
//!
//! Laplacian convention: `Δ = −y²(∂ₓ² + ∂ᵧ²)` (positive). The eigenvalue
//! equation of weight `s` reads `Δf = s(1−s)f`, so the Helmholtz operator
//! annihilating `y^s`, Eisenstein series and the Green kernel is
//! `s(1−s) − Δ`; see [`helmholtz_fd`].

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{coset_representatives, enumerate_ball, invariant_height_in, GroupData, Vertex, Word};
use crate::hyperbolic::{
    exp_point, hyperbolic_distance, imaginary_of_action, moebius_apply, point_pair_invariant, BoundaryPoint,
    GroupElement, PointH,
};
use crate::linalg::{e, frobenius, zeros, CMat};
use crate::quadrature::{gauss_legendre_interval, integrate, integrate_to_infinity, QuadOptions, QuadValue};
use crate::representation::{check_unitary_at_cusps, cusp_eigendata, operator_norm, rep_of_word, Representation};
use crate::special::{fourier_integral_mode, fourier_integral_zero, log_gamma, resolvent_green, resolvent_green_derivative};

/// Tolerance of the adaptive `t`-integrals in principal parts.
pub const STRIP_REL_TOL: f64 = 1e-10;
/// Below this the Green difference is evaluated at `u = U_FLOOR`; the two
/// logarithmic singularities cancel, so the difference is continuous at 0.
const U_FLOOR: f64 = 1e-12;
/// Largest grid accepted by the spectrum probe.
pub const PROBE_MAX_NODES: usize = 4000;
/// Above this `√Q` the parabolic sum is replaced by its Poisson dual.
const POISSON_MIN_ROOT_Q: f64 = 6.0;
/// Dual terms with `2π|ξ|√Q` above this are below `e^{−40}`.
const POISSON_CUTOFF: f64 = 40.0;
/// Terms of the summation-by-parts tail for twisted parabolic sums.
const ABEL_ORDER: usize = 8;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A kernel `k(z, w) = k(u(z, w))` depending on the point-pair invariant only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointPairKernel {
    /// `(1 + u)^{−σ}`.
    PowerDecay { sigma: f64 },
    /// `exp(1 − 1/(1 − (u/u_max)²))` on `[0, u_max)`, zero beyond.
    SmoothBump { u_max: f64 },
    /// `G_a(u/4) − G_b(u/4)`.
    GreenDifference { a: Complex64, b: Complex64 },
    /// `k ≡ 0`.
    Zero,
}

impl PointPairKernel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PointPairKernel::PowerDecay { sigma } => sigma.is_finite() && sigma > 0.5,
            PointPairKernel::SmoothBump { u_max } => u_max.is_finite() && u_max > 0.0,
            PointPairKernel::GreenDifference { a, b } => a.re > 0.0 && b.re > 0.0 && a.is_finite() && b.is_finite(),
            PointPairKernel::Zero => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid point-pair kernel {self:?}")))
        }
    }

    pub fn value(&self, u: f64) -> Result<Complex64> {
        Ok(match *self {
            PointPairKernel::PowerDecay { sigma } => c((1.0 + u).powf(-sigma)),
            PointPairKernel::SmoothBump { u_max } => c(bump(u / u_max)),
            PointPairKernel::GreenDifference { a, b } => {
                let q = u.max(U_FLOOR) / 4.0;
                resolvent_green(a, q)? - resolvent_green(b, q)?
            }
            PointPairKernel::Zero => c(0.0),
        })
    }

    pub fn derivative(&self, u: f64) -> Result<Complex64> {
        Ok(match *self {
            PointPairKernel::PowerDecay { sigma } => c(-sigma * (1.0 + u).powf(-sigma - 1.0)),
            PointPairKernel::SmoothBump { u_max } => {
                let t = u / u_max;
                if t.abs() >= 1.0 {
                    c(0.0)
                } else {
                    let q = 1.0 - t * t;
                    c(bump(t) * (-2.0 * t / (q * q)) / u_max)
                }
            }
            PointPairKernel::GreenDifference { a, b } => {
                let q = u.max(U_FLOOR) / 4.0;
                (resolvent_green_derivative(a, q)? - resolvent_green_derivative(b, q)?) / 4.0
            }
            PointPairKernel::Zero => c(0.0),
        })
    }

    /// `∫_ℝ k(((t + dx)² + (A−B)²)/(AB)) dt` — the `t`-integral of a
    /// principal-part term, where `A`, `B` are the heights of the two points
    /// in cusp coordinates. Independent of `dx`.
    pub fn strip_integral(&self, a: f64, b: f64) -> Result<Complex64> {
        let ab = a * b;
        let d2 = (a - b) * (a - b);
        match *self {
            PointPairKernel::PowerDecay { sigma } => {
                let q = d2 + ab;
                Ok(c(sigma * ab.ln()).exp() * fourier_integral_zero(c(sigma), q.sqrt())?)
            }
            PointPairKernel::SmoothBump { u_max } => {
                let reach = u_max * ab - d2;
                if reach <= 0.0 {
                    return Ok(c(0.0));
                }
                let r = integrate(|t: f64| bump((t * t + d2) / ab / u_max), 0.0, reach.sqrt(), QuadOptions::rel(STRIP_REL_TOL));
                Ok(c(2.0 * r.value))
            }
            PointPairKernel::GreenDifference { .. } => {
                let mut err = None;
                let r = integrate_to_infinity(
                    |t: f64| match self.value((t * t + d2) / ab) {
                        Ok(v) => v,
                        Err(e) => {
                            err.get_or_insert(e);
                            c(0.0)
                        }
                    },
                    0.0,
                    QuadOptions::rel(STRIP_REL_TOL),
                );
                match err {
                    Some(e) => Err(e),
                    None => Ok(2.0 * r.value),
                }
            }
            PointPairKernel::Zero => Ok(c(0.0)),
        }
    }

    /// `Σ_{m∈ℤ} k(((dx + m)² + (A−B)²)/(AB)) e(mν)`: the sum over a cusp
    /// stabilizer acting on one coset, restricted to the `e(ν)` eigenspace.
    pub fn parabolic_sum(&self, dx: f64, a: f64, b: f64, nu: f64) -> Result<Complex64> {
        let ab = a * b;
        let d2 = (a - b) * (a - b);
        match *self {
            PointPairKernel::Zero => Ok(c(0.0)),
            PointPairKernel::SmoothBump { u_max } => {
                let reach = u_max * ab - d2;
                if reach <= 0.0 {
                    return Ok(c(0.0));
                }
                let r = reach.sqrt();
                let (lo, hi) = ((-dx - r).ceil() as i64, (-dx + r).floor() as i64);
                let mut acc = c(0.0);
                for m in lo..=hi {
                    let t = dx + m as f64;
                    acc += e(m as f64 * nu) * bump((t * t + d2) / ab / u_max);
                }
                Ok(acc)
            }
            PointPairKernel::PowerDecay { sigma } => power_parabolic_sum(sigma, dx, ab, d2 + ab, nu),
            PointPairKernel::GreenDifference { .. } => {
                let q = d2 + ab;
                let g = |t: f64| self.value((t * t + d2) / ab);
                direct_with_tail(&g, dx, q.sqrt() * 4.0 + 64.0, nu, |from| {
                    let mut err = None;
                    let r = integrate_to_infinity(
                        |t: f64| match g(t) {
                            Ok(v) => v,
                            Err(e) => {
                                err.get_or_insert(e);
                                c(0.0)
                            }
                        },
                        from,
                        QuadOptions::rel(1e-8),
                    );
                    match err {
                        Some(e) => Err(e),
                        None => Ok(r.value),
                    }
                })
            }
        }
    }
}

/// `exp(1 − 1/(1 − t²))` for `|t| < 1`, else 0.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// The power-kernel parabolic sum `Σ_m (AB)^σ((m + dx)² + Q)^{−σ} e(mν)`.
fn power_parabolic_sum(sigma: f64, dx: f64, ab: f64, q: f64, nu: f64) -> Result<Complex64> {
    let root = q.sqrt();
    let pre = ab.powf(sigma);
    if root >= POISSON_MIN_ROOT_Q {
        // Poisson: Σ_m g(m)e(mν) = Σ_k ĝ(k − ν), ĝ(ξ) = pre·e(ξ dx)·∫(t² + Q)^{−σ}e(−ξt)dt.
        let kmax = (POISSON_CUTOFF / (TAU * root)).ceil() as i64 + 1;
        let mut acc = c(0.0);
        for k in -kmax..=kmax {
            let xi = k as f64 - nu;
            if TAU * xi.abs() * root > POISSON_CUTOFF {
                continue;
            }
            let i = if xi == 0.0 { fourier_integral_zero(c(sigma), root)? } else { fourier_integral_mode(c(sigma), xi, root)? };
            acc += e(xi * dx) * i;
        }
        return Ok(acc * pre);
    }
    let g = |t: f64| Ok(c(pre * (t * t + q).powf(-sigma)));
    direct_with_tail(&g, dx, 6.0 * root + 12.0, nu, |from| Ok(c(pre * power_tail(sigma, q, from))))
}

/// `∫_T^∞ (t² + Q)^{−σ} dt` for `T² ≥ 16Q`, by the binomial series in `Q/t²`.
fn power_tail(sigma: f64, q: f64, t: f64) -> f64 {
    let x = q / (t * t);
    let mut coeff = 1.0;
    let mut sum = 0.0;
    for k in 0..12 {
        let kf = k as f64;
        sum += coeff * x.powi(k) / (2.0 * sigma + 2.0 * kf - 1.0);
        coeff *= -(sigma + kf) / (kf + 1.0);
    }
    t.powf(1.0 - 2.0 * sigma) * sum
}

/// `Σ_m g(m + dx)e(mν)` summed directly over `|m + dx| ≤ reach`. The tails
/// are the integrals `tail(from)` = `∫_from^∞ g` with the first midpoint
/// Euler–Maclaurin correction when `ν = 0` (for even `g`), and repeated
/// summation by parts otherwise.
fn direct_with_tail<G, T>(g: &G, dx: f64, reach: f64, nu: f64, tail: T) -> Result<Complex64>
where
    G: Fn(f64) -> Result<Complex64>,
    T: Fn(f64) -> Result<Complex64>,
{
    let (lo, hi) = ((-dx - reach).ceil() as i64, (-dx + reach).floor() as i64);
    let mut acc = c(0.0);
    for m in lo..=hi {
        acc += e(m as f64 * nu) * g(dx + m as f64)?;
    }
    if nu == 0.0 {
        // Σ_{m ≥ n} g(m) ≈ ∫_{n−½}^∞ g + g'(n − ½)/24 (midpoint Euler–Maclaurin).
        for from in [dx + hi as f64 + 0.5, -(dx + lo as f64 - 0.5)] {
            let h = 1e-3 * from.abs().max(1.0);
            let slope = (g(from + h)? - g(from - h)?) / (2.0 * h);
            acc += tail(from)? + slope / 24.0;
        }
    } else {
        // Σ_{m≥0} g(n+m)q^m = Σ_j q^j Δ^j g(n)/(1 − q)^{j+1}, truncated after a few
        // differences; the left tail is the mirror image with q̄.
        for (start, step, q) in [(hi + 1, 1i64, e(nu)), (lo - 1, -1i64, e(-nu))] {
            let mut diffs = (0..ABEL_ORDER as i64).map(|m| g(dx + (start + step * m) as f64)).collect::<Result<Vec<_>>>()?;
            let mut sum = c(0.0);
            let mut factor = e(start as f64 * nu) / (c(1.0) - q);
            for _ in 0..ABEL_ORDER {
                sum += factor * diffs[0];
                for i in 0..diffs.len() - 1 {
                    diffs[i] = diffs[i + 1] - diffs[i];
                }
                diffs.pop();
                factor *= q / (c(1.0) - q);
            }
            acc += sum;
        }
    }
    Ok(acc)
}

/// A ball-truncated automorphic kernel value.
#[derive(Clone, Debug, Serialize)]
pub struct KernelValue {
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub value: CMat,
    /// Frobenius norm of the outermost shell's contribution.
    pub shell_error: f64,
    pub terms: usize,
}

/// Ball elements with their `χ`-images, for repeated ball sums.
#[derive(Clone, Debug)]
pub struct BallTable {
    pub word_length: usize,
    elements: Vec<GroupElement>,
    chi: Vec<CMat>,
    shells: Vec<usize>,
    words: Vec<Word>,
}

impl BallTable {
    pub fn new(group: &GroupData, rep: &Representation, word_length: usize) -> Result<Self> {
        let ball = enumerate_ball(group, word_length);
        let chi = ball.iter().map(|(w, _)| rep_of_word(rep, w)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            word_length,
            shells: ball.iter().map(|(w, _)| w.len()).collect(),
            elements: ball.iter().map(|(_, g)| *g).collect(),
            words: ball.into_iter().map(|(w, _)| w).collect(),
            chi,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Element and word of entry `i`.
    pub fn entry(&self, i: usize) -> (&Word, &GroupElement) {
        (&self.words[i], &self.elements[i])
    }

    /// `Σ_{γ ∈ ball} k(u(z, γw)) χ(γ)`, with terms of word length `≥ from`
    /// additionally collected as the shell estimate.
    pub fn sum(&self, k: &PointPairKernel, z: &PointH, w: &PointH) -> Result<KernelValue> {
        let n = self.chi.first().map_or(1, |m| m.nrows());
        let mut total = zeros(n);
        let mut shell = zeros(n);
        for i in 0..self.len() {
            let kv = k.value(point_pair_invariant(z, &moebius_apply(&self.elements[i], w)))?;
            if kv == c(0.0) {
                continue;
            }
            let term = &self.chi[i] * kv;
            if self.shells[i] == self.word_length && self.word_length > 0 {
                shell += &term;
            }
            total += term;
        }
        Ok(KernelValue { value: total, shell_error: frobenius(&shell), terms: self.len() })
    }
}

/// `K(z, w) = Σ_{γ∈Γ} k(z, γw) χ(γ)`, truncated to the ball of radius `L`.
pub fn automorphic_kernel(
    group: &GroupData,
    rep: &Representation,
    k: &PointPairKernel,
    z: &PointH,
    w: &PointH,
    word_length: usize,
) -> Result<KernelValue> {
    k.validate()?;
    BallTable::new(group, rep, word_length)?.sum(k, z, w)
}

/// Per-cusp coset data for the parabolic decomposition
/// `Γ = ⊔_{τ ∈ Γ_a\Γ} ⊔_m γ_a^m τ`.
#[derive(Clone, Debug)]
struct CuspPart {
    sigma_inv: GroupElement,
    nu: Vec<f64>,
    /// `σ_a⁻¹τ`.
    scaled: Vec<GroupElement>,
    /// `P_j χ(τ)` for each eigenvalue `e(ν_j)` of `χ(γ_a)`.
    split: Vec<Vec<CMat>>,
    /// `χ(τ⁻¹) P_j`, for sums complete in the second variable.
    split_right: Vec<Vec<CMat>>,
    /// `P_a χ(τ)`, or empty when `P_a = 0`.
    principal: Vec<CMat>,
    shells: Vec<usize>,
}

/// The automorphic kernel of a point-pair kernel and its principal parts,
/// with coset data precomputed at word length `L`.
///
/// `K(z, w)` is summed as `Σ_τ Σ_m k(z, γ_b^m τ w) χ(γ_b)^m χ(τ)` with the
/// cusp `b` chosen where `z` sits highest; the inner sum over the stabilizer
/// is complete (directly or through its Poisson dual), so only the coset sum
/// is truncated. This keeps `K` accurate deep in the cusps, where a ball sum
/// would need words of length proportional to the height.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    pub kernel: PointPairKernel,
    pub dim: usize,
    pub word_length: usize,
    cusps: Vec<CuspPart>,
}

impl KernelOperator {
    pub fn new(group: &GroupData, rep: &Representation, kernel: PointPairKernel, word_length: usize) -> Result<Self> {
        kernel.validate()?;
        let report = check_unitary_at_cusps(group, rep)?;
        if let Some(a) = report.defects.iter().position(|&d| d > 1e-9) {
            return Err(Error::NotUnitary(a));
        }
        let mut cusps = Vec::new();
        for a in 0..group.cusps().len() {
            let eig = cusp_eigendata(group, rep, a)?;
            let sigma_inv = group.cusp(a)?.sigma.inverse();
            let reps = coset_representatives(group, a, word_length)?;
            let chi = reps.iter().map(|r| rep_of_word(rep, &r.word)).collect::<Result<Vec<_>>>()?;
            let singular = eig.projections[0].iter().any(|z| z.norm() > 0.0);
            let principal = if singular { chi.iter().map(|x| &eig.projections[0] * x).collect() } else { Vec::new() };
            let split = chi.iter().map(|x| eig.projections.iter().map(|p| p * x).collect()).collect();
            let split_right = reps
                .iter()
                .map(|r| {
                    let inv = rep_of_word(rep, &group.inverse_word(&r.word))?;
                    Ok(eig.projections.iter().map(|p| &inv * p).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            cusps.push(CuspPart {
                sigma_inv,
                nu: eig.nu,
                scaled: reps.iter().map(|r| sigma_inv.mul(&r.element)).collect(),
                split,
                split_right,
                principal,
                shells: reps.iter().map(|r| r.shell).collect(),
            });
        }
        Ok(Self { kernel, dim: rep.dim(), word_length, cusps })
    }

    pub fn cusp_count(&self) -> usize {
        self.cusps.len()
    }

    /// Cusp in whose coordinates `z` is highest, and that height.
    fn home_cusp(&self, z: &PointH) -> (usize, f64) {
        self.cusps
            .iter()
            .enumerate()
            .map(|(a, p)| (a, imaginary_of_action(&p.sigma_inv, z)))
            .fold((0, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best })
    }

    /// `K(z, w)`, decomposed at the cusp where the higher of the two points
    /// sits, so that the parabolic sum of that point is complete. Swapping
    /// the arguments mirrors the decomposition, which keeps `K(w, z)` and
    /// `K(z, w)*` on the same truncation for unitary `χ`.
    pub fn kernel(&self, z: &PointH, w: &PointH) -> Result<CMat> {
        let (b, hz) = self.home_cusp(z);
        let (c, hw) = self.home_cusp(w);
        // Ties (equal heights in different cusps) are broken by the points
        // themselves so that the choice still mirrors under swapping.
        let key = |h: f64, q: &PointH| [h, q.y(), q.x()];
        let w_higher = key(hw, w).iter().zip(key(hz, z).iter()).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne());
        if w_higher == Some(std::cmp::Ordering::Greater) {
            self.kernel_via_right(c, z, w)
        } else {
            self.kernel_via(b, z, w)
        }
    }

    /// `K(z, w)` through the decomposition at cusp `b`.
    pub fn kernel_via(&self, b: usize, z: &PointH, w: &PointH) -> Result<CMat> {
        let part = self.part(b)?;
        let zeta = moebius_apply(&part.sigma_inv, z);
        let mut acc = zeros(self.dim);
        for (i, g) in part.scaled.iter().enumerate() {
            let omega = moebius_apply(g, w);
            let dx = omega.x() - zeta.x();
            for (j, &nu) in part.nu.iter().enumerate() {
                let s = self.kernel.parabolic_sum(dx, zeta.y(), omega.y(), nu)?;
                if s != c(0.0) {
                    acc += &part.split[i][j] * s;
                }
            }
        }
        Ok(acc)
    }

    /// `K(z, w)` through `Γ = ⊔_ρ ⊔_m ρ⁻¹γ_c^m` with `ρ ∈ Γ_c\Γ`:
    /// `Σ_ρ χ(ρ⁻¹) Σ_m k(ρz, γ_c^m w) χ(γ_c)^m`, complete in the second
    /// variable's cusp.
    pub fn kernel_via_right(&self, c: usize, z: &PointH, w: &PointH) -> Result<CMat> {
        let part = self.part(c)?;
        let zeta = moebius_apply(&part.sigma_inv, w);
        let mut acc = zeros(self.dim);
        for (i, g) in part.scaled.iter().enumerate() {
            let omega = moebius_apply(g, z);
            let dx = zeta.x() - omega.x();
            for (j, &nu) in part.nu.iter().enumerate() {
                let s = self.kernel.parabolic_sum(dx, omega.y(), zeta.y(), nu)?;
                if s != Complex64::new(0.0, 0.0) {
                    acc += &part.split_right[i][j] * s;
                }
            }
        }
        Ok(acc)
    }

    fn part(&self, a: usize) -> Result<&CuspPart> {
        self.cusps.get(a).ok_or(Error::InvalidIndex { index: a, count: self.cusps.len() })
    }

    /// `H_a(z, w) = Σ_{γ∈Γ_a\Γ} ∫_ℝ k(z, σ_a n(t) σ_a⁻¹ γw) dt · P_a χ(γ)`.
    pub fn principal_part(&self, a: usize, z: &PointH, w: &PointH) -> Result<CMat> {
        Ok(self.principal_part_split(a, z, w)?.0)
    }

    /// `H_a(z, w)` and the Frobenius norm of its outermost coset shell.
    pub fn principal_part_split(&self, a: usize, z: &PointH, w: &PointH) -> Result<(CMat, f64)> {
        let part = self.part(a)?;
        let mut acc = zeros(self.dim);
        let mut shell = zeros(self.dim);
        if part.principal.is_empty() {
            return Ok((acc, 0.0));
        }
        let ya = imaginary_of_action(&part.sigma_inv, z);
        for (i, g) in part.scaled.iter().enumerate() {
            let h = self.kernel.strip_integral(ya, imaginary_of_action(g, w))?;
            if h != c(0.0) {
                let term = &part.principal[i] * h;
                if part.shells[i] == self.word_length && self.word_length > 0 {
                    shell += &term;
                }
                acc += term;
            }
        }
        Ok((acc, frobenius(&shell)))
    }

    /// `K̂(z, w) = K(z, w) − Σ_a H_a(z, w)`.
    pub fn compact_part(&self, z: &PointH, w: &PointH) -> Result<CMat> {
        let mut k = self.kernel(z, w)?;
        for a in 0..self.cusps.len() {
            k -= self.principal_part(a, z, w)?;
        }
        Ok(k)
    }

    /// `∫₀¹ P_a K(σ_a(x + iy), w) dx`, the zeroth Fourier coefficient of `K`
    /// in its first variable at cusp `a`. Equals `H_a(σ_a(iy), w)` up to the
    /// coset truncation.
    pub fn kernel_zeroth_coefficient(&self, group: &GroupData, a: usize, y: f64, w: &PointH, rel_tol: f64) -> Result<CMat> {
        let sigma = group.cusp(a)?.sigma;
        let part = self.part(a)?;
        if part.principal.is_empty() {
            return Ok(zeros(self.dim));
        }
        let proj = self.projection(a)?;
        let mut err = None;
        let r = integrate(
            |x: f64| {
                let z = moebius_apply(&sigma, &PointH::raw(x, y));
                match self.kernel(&z, w) {
                    Ok(m) => &proj * m,
                    Err(e) => {
                        err.get_or_insert(e);
                        zeros(self.dim)
                    }
                }
            },
            0.0,
            1.0,
            QuadOptions::rel(rel_tol),
        );
        match err {
            Some(e) => Err(e),
            None => Ok(r.value),
        }
    }

    /// `P_a`, recovered from the stored principal weights of the identity
    /// coset (whose `χ(τ)` is the identity).
    fn projection(&self, a: usize) -> Result<CMat> {
        let part = self.part(a)?;
        match part.shells.iter().position(|&s| s == 0) {
            Some(i) if !part.principal.is_empty() => Ok(part.principal[i].clone()),
            _ => Ok(zeros(self.dim)),
        }
    }
}

/// Principal part at cusp `a` with coset data at word length `L`.
pub fn principal_part(
    group: &GroupData,
    rep: &Representation,
    k: &PointPairKernel,
    a: usize,
    z: &PointH,
    w: &PointH,
    word_length: usize,
) -> Result<CMat> {
    KernelOperator::new(group, rep, *k, word_length)?.principal_part(a, z, w)
}

/// Compact part `K̂ = K − Σ_a H_a` with coset data at word length `L`.
pub fn compact_part(
    group: &GroupData,
    rep: &Representation,
    k: &PointPairKernel,
    z: &PointH,
    w: &PointH,
    word_length: usize,
) -> Result<CMat> {
    KernelOperator::new(group, rep, *k, word_length)?.compact_part(z, w)
}

/// `c₀(f, a, y) = ∫₀¹ P_a f(σ_a(x + iy)) dx` by adaptive quadrature at
/// relative tolerance `1e−9`.
pub fn zeroth_coefficient<F>(group: &GroupData, rep: &Representation, f: F, a: usize, y: f64) -> Result<Vec<Complex64>>
where
    F: Fn(&PointH) -> Vec<Complex64>,
{
    if !(y > 0.0) {
        return Err(Error::Domain(format!("zeroth coefficient needs y > 0, got {y}")));
    }
    let sigma = group.cusp(a)?.sigma;
    let p = crate::representation::fixed_space_projection(group, rep, a)?;
    let n = rep.dim();
    let r = integrate(
        |x: f64| {
            let v = f(&moebius_apply(&sigma, &PointH::raw(x, y)));
            let v = nalgebra::DVector::from_vec(v);
            let pv = &p * v;
            pv.iter().copied().collect::<Vec<_>>()
        },
        0.0,
        1.0,
        QuadOptions::rel(1e-9),
    );
    if r.value.len() != n {
        return Err(Error::Domain(format!("test function returned {} components, expected {n}", r.value.len())));
    }
    Ok(r.value)
}

/// The unfolded pairing `∫₀^∞∫₀¹ h_a(z, y) P_a f(σ_a(x + iy)) dx dy/y²`
/// against `f(σ_a(x+iy)) = e(kx)·bump_y(y)·v`, the `Γ_a`-periodic test
/// function with vanishing zeroth coefficient; `h_a` is the `t`-integral of
/// the principal part. Returns `(‖pairing‖, ‖f‖_{L²(strip)})`.
pub fn annihilation_pairing(
    op: &KernelOperator,
    a: usize,
    z: &PointH,
    mode: i64,
    y_support: (f64, f64),
    v: &[Complex64],
) -> Result<(f64, f64)> {
    if mode == 0 {
        return Err(Error::Domain("the annihilation test needs a non-zero mode".into()));
    }
    let (y0, y1) = y_support;
    if !(y0 > 0.0 && y1 > y0) {
        return Err(Error::Domain(format!("bad y-support ({y0}, {y1})")));
    }
    let part = op.part(a)?;
    let proj = op.projection(a)?;
    let v = nalgebra::DVector::from_column_slice(v);
    if v.len() != op.dim {
        return Err(Error::Domain(format!("vector of length {} for dimension {}", v.len(), op.dim)));
    }
    let pv: Vec<Complex64> = (&proj * &v).iter().copied().collect();
    let ya = imaginary_of_action(&part.sigma_inv, z);
    let profile = |y: f64| bump((2.0 * y - y0 - y1) / (y1 - y0));
    // Trapezoid rule in x: exact for trigonometric polynomials of degree < nx.
    let nx = 4 * mode.unsigned_abs() as usize + 16;
    let mut err = None;
    let pairing = integrate(
        |y: f64| {
            let h = match op.kernel.strip_integral(ya, y) {
                Ok(h) => h,
                Err(e) => {
                    err.get_or_insert(e);
                    c(0.0)
                }
            };
            let xs: Complex64 = (0..nx).map(|i| e(mode as f64 * (i as f64 + 0.5) / nx as f64)).sum::<Complex64>() / nx as f64;
            let scale = h * xs * profile(y) / (y * y);
            pv.iter().map(|p| p * scale).collect::<Vec<_>>()
        },
        y0,
        y1,
        QuadOptions::rel(1e-10),
    );
    if let Some(e) = err {
        return Err(e);
    }
    let norm_sq = integrate(|y: f64| profile(y).powi(2) / (y * y), y0, y1, QuadOptions::rel(1e-10)).value;
    Ok((pairing.value.magnitude(), norm_sq.sqrt() * v.norm()))
}

/// Grid resolution for [`QuadratureGrid`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cut height `Y` between the central part and the cuspidal strips.
    pub y_cut: f64,
    /// Top of the cuspidal strips.
    pub y_max: f64,
    /// Central cells along x and along log y.
    pub nx: usize,
    pub ny: usize,
    /// Strip cells along x and along log y, per cusp.
    pub strip_nx: usize,
    pub strip_ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { y_cut: 1.5, y_max: 12.0, nx: 12, ny: 12, strip_nx: 4, strip_ny: 4 }
    }
}

impl GridSpec {
    /// The same region with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nx: self.nx * factor,
            ny: self.ny * factor,
            strip_nx: self.strip_nx * factor,
            strip_ny: self.strip_ny * factor,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.y_cut > 0.0 && self.y_max > self.y_cut && self.y_max.is_finite()) {
            return Err(Error::Domain(format!("grid heights need 0 < Y < Y_max, got {} and {}", self.y_cut, self.y_max)));
        }
        if self.nx == 0 || self.ny == 0 || self.strip_nx == 0 || self.strip_ny == 0 {
            return Err(Error::Domain("grid cell counts must be positive".into()));
        }
        Ok(())
    }
}

/// Quadrature nodes on the central part `F(Y)` of the fundamental domain
/// plus the cuspidal strips `σ_a([0,1) × (Y, Y_max])`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureGrid {
    pub spec: GridSpec,
    /// `(z, weight)` with weights in the measure `dx dy/y²`.
    pub nodes: Vec<(PointH, f64)>,
    pub central_nodes: usize,
}

/// Sub-samples per central cell side, for the partial-cell weights.
const SUBSAMPLE: usize = 4;

impl QuadratureGrid {
    /// Central cells are midpoint cells in `(x, log y)` over a bounding box
    /// of `F(Y)`; a cell cut by the boundary keeps the fraction of its
    /// sub-samples inside, at their centroid. Strip nodes are midpoint cells
    /// in `(x, log y)` mapped by `σ_a`.
    pub fn new(group: &GroupData, spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let ball = enumerate_ball(group, 3);
        let (x_lo, x_hi, y_lo, y_hi) = central_box(group, &ball, spec.y_cut)?;
        let inside = |z: &PointH| group.in_closure(z) && invariant_height_in(group, &ball, z) <= spec.y_cut;
        let mut nodes = Vec::new();
        let (lx, ly) = (x_hi - x_lo, (y_hi / y_lo).ln());
        for iy in 0..spec.ny {
            let (y0, y1) = (y_lo * (ly * iy as f64 / spec.ny as f64).exp(), y_lo * (ly * (iy + 1) as f64 / spec.ny as f64).exp());
            for ix in 0..spec.nx {
                let (x0, x1) = (x_lo + lx * ix as f64 / spec.nx as f64, x_lo + lx * (ix + 1) as f64 / spec.nx as f64);
                let mut count = 0usize;
                let (mut sx, mut sy) = (0.0, 0.0);
                for jy in 0..SUBSAMPLE {
                    let y = y0 * ((y1 / y0).ln() * (jy as f64 + 0.5) / SUBSAMPLE as f64).exp();
                    for jx in 0..SUBSAMPLE {
                        let x = x0 + (x1 - x0) * (jx as f64 + 0.5) / SUBSAMPLE as f64;
                        if inside(&PointH::raw(x, y)) {
                            count += 1;
                            sx += x;
                            sy += y.ln();
                        }
                    }
                }
                if count > 0 {
                    let frac = count as f64 / (SUBSAMPLE * SUBSAMPLE) as f64;
                    let area = (x1 - x0) * (1.0 / y0 - 1.0 / y1);
                    let z = PointH::raw(sx / count as f64, (sy / count as f64).exp());
                    nodes.push((z, frac * area));
                }
            }
        }
        let central_nodes = nodes.len();
        let lr = (spec.y_max / spec.y_cut).ln();
        for cusp in group.cusps() {
            for iy in 0..spec.strip_ny {
                let y0 = spec.y_cut * (lr * iy as f64 / spec.strip_ny as f64).exp();
                let y1 = spec.y_cut * (lr * (iy + 1) as f64 / spec.strip_ny as f64).exp();
                let weight = (1.0 / y0 - 1.0 / y1) / spec.strip_nx as f64;
                for ix in 0..spec.strip_nx {
                    let x = (ix as f64 + 0.5) / spec.strip_nx as f64;
                    nodes.push((moebius_apply(&cusp.sigma, &PointH::raw(x, (y0 * y1).sqrt())), weight));
                }
            }
        }
        Ok(Self { spec, nodes, central_nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|(_, w)| w).sum()
    }
}

/// Bounding box `(x_lo, x_hi, y_lo, y_hi)` of `F(Y)`. The top is the cut
/// height at a cusp at ∞; the bottom is a quarter of the smallest horoball
/// at a finite ideal vertex of F.
fn central_box(group: &GroupData, ball: &[(Word, GroupElement)], y_cut: f64) -> Result<(f64, f64, f64, f64)> {
    let mut xs = Vec::new();
    let mut finite_top: f64 = 0.0;
    let mut ideal = Vec::new();
    for side in group.sides() {
        for v in [side.start, side.end] {
            match v {
                Vertex::Finite(p) => {
                    xs.push(p.x());
                    finite_top = finite_top.max(p.y());
                }
                Vertex::Ideal(BoundaryPoint::Real(x)) => {
                    xs.push(x);
                    ideal.push(x);
                }
                Vertex::Ideal(BoundaryPoint::Infinity) => {}
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::GroupData("fundamental domain has no finite vertex".into()));
    }
    let x_lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let x_hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut y_hi = 2.0 * finite_top.max(1.0);
    let mut diameters = Vec::new();
    for cusp in group.cusps() {
        for (_, g) in ball {
            let m = g.mul(&cusp.sigma);
            if m.c().abs() < 1e-9 {
                // A cusp at ∞: the strip starts at Im z = Y·a².
                y_hi = y_hi.max(y_cut * m.a() * m.a());
            } else {
                let at = m.a() / m.c();
                if ideal.iter().any(|&x| (x - at).abs() < 1e-9) {
                    diameters.push(1.0 / (y_cut * m.c() * m.c()));
                }
            }
        }
    }
    let y_lo = 0.25 * diameters.iter().copied().fold(f64::INFINITY, f64::min).min(y_hi * 0.5);
    Ok((x_lo, x_hi, y_lo, y_hi))
}

/// Blocks `K̂(z_i, z_j)` over a grid, row-major.
pub fn compact_part_matrix(op: &KernelOperator, grid: &QuadratureGrid) -> Result<Vec<Vec<CMat>>> {
    grid.nodes
        .par_iter()
        .map(|(zi, _)| grid.nodes.iter().map(|(zj, _)| op.compact_part(zi, zj)).collect::<Result<Vec<_>>>())
        .collect()
}

/// `∬ ‖K̂(z, w)‖²_F dz dw` over one grid.
pub fn hs_norm_from_blocks(blocks: &[Vec<CMat>], grid: &QuadratureGrid) -> f64 {
    let rows: Vec<f64> = blocks
        .iter()
        .zip(&grid.nodes)
        .map(|(row, (_, wi))| row.iter().zip(&grid.nodes).map(|(m, (_, wj))| wj * frobenius(m).powi(2)).sum::<f64>() * wi)
        .collect();
    rows.iter().sum()
}

/// One grid's Hilbert–Schmidt estimate.
#[derive(Clone, Debug, Serialize)]
pub struct HsLevel {
    pub level: usize,
    pub nodes: usize,
    pub y_cut: f64,
    pub y_max: f64,
    /// `∬‖K̂‖²_F`; the Hilbert–Schmidt norm is its square root.
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HsReport {
    pub levels: Vec<HsLevel>,
    /// `|v₂ − v₁| / v₂` between the two levels.
    pub relative_change: f64,
}

/// `∬‖K̂(z, w)‖²_F dz dw` on one grid.
pub fn hs_norm_estimate(op: &KernelOperator, grid: &QuadratureGrid) -> Result<f64> {
    Ok(hs_norm_from_blocks(&compact_part_matrix(op, grid)?, grid))
}

/// Hilbert–Schmidt estimates on `spec` (level 1) and on `spec` refined by a
/// factor 2 in every direction (level 2).
pub fn hs_refinement(group: &GroupData, op: &KernelOperator, spec: GridSpec) -> Result<HsReport> {
    let mut levels = Vec::new();
    for level in 1..=2 {
        let grid = QuadratureGrid::new(group, spec.refined(level))?;
        levels.push(HsLevel {
            level,
            nodes: grid.len(),
            y_cut: spec.y_cut,
            y_max: spec.y_max,
            value: hs_norm_estimate(op, &grid)?,
        });
    }
    let (v1, v2) = (levels[0].value, levels[1].value);
    let relative_change = if v2 == 0.0 { (v1 - v2).abs() } else { (v1 - v2).abs() / v2.abs() };
    Ok(HsReport { levels, relative_change })
}

/// Eigenvalues of `M[(i,·),(j,·)] = K̂(z_i, z_j)·weight_j`, largest modulus
/// first.
pub fn kernel_spectrum_probe(op: &KernelOperator, grid: &QuadratureGrid) -> Result<Vec<Complex64>> {
    if grid.len() > PROBE_MAX_NODES {
        return Err(Error::Limit(format!("spectrum probe limited to {PROBE_MAX_NODES} nodes, grid has {}", grid.len())));
    }
    let blocks = compact_part_matrix(op, grid)?;
    spectrum_from_blocks(&blocks, grid, op.dim)
}

/// The probe's eigenvalues from precomputed blocks, via the complex Schur
/// form.
pub fn spectrum_from_blocks(blocks: &[Vec<CMat>], grid: &QuadratureGrid, dim: usize) -> Result<Vec<Complex64>> {
    let m = probe_matrix(blocks, grid, dim);
    let n = m.nrows();
    if m.iter().all(|z| *z == c(0.0)) {
        return Ok(vec![c(0.0); n]);
    }
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::Limit(format!("Schur iteration did not converge on the {n}×{n} probe matrix")))?;
    let (_, t) = schur.unpack();
    let mut ev: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

/// The weighted discretization matrix of the probe.
pub fn probe_matrix(blocks: &[Vec<CMat>], grid: &QuadratureGrid, dim: usize) -> DMatrix<Complex64> {
    let n = grid.len() * dim;
    DMatrix::from_fn(n, n, |r, s| {
        let (i, a) = (r / dim, r % dim);
        let (j, b) = (s / dim, s % dim);
        blocks[i][j][(a, b)] * grid.nodes[j].1
    })
}

/// Axis-parallel box in ℍ containing the support of a test function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl SupportBox {
    pub fn validate(&self) -> Result<()> {
        if self.x0 < self.x1 && 0.0 < self.y0 && self.y0 < self.y1 && self.x1.is_finite() && self.y1.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("bad support box {self:?}")))
        }
    }

    /// The smooth bump `φ(x̂)φ(ŷ)` with `φ = exp(1 − 1/(1 − t²))` in the
    /// box's normalized coordinates.
    pub fn bump(&self, z: &PointH) -> f64 {
        let tx = (2.0 * z.x() - self.x0 - self.x1) / (self.x1 - self.x0);
        let ty = (2.0 * z.y() - self.y0 - self.y1) / (self.y1 - self.y0);
        bump(tx) * bump(ty)
    }

    /// Hyperbolic radius around `z` enclosing the box, rounded up to a
    /// multiple of 1/4 so that nearby centres share one radial rule.
    fn enclosing_radius(&self, z: &PointH) -> f64 {
        const SAMPLES: usize = 64;
        let mut best: f64 = 0.0;
        for i in 0..=SAMPLES {
            let t = i as f64 / SAMPLES as f64;
            let x = self.x0 + t * (self.x1 - self.x0);
            let y = self.y0 * (self.y1 / self.y0).powf(t);
            for p in [(x, self.y0), (x, self.y1), (self.x0, y), (self.x1, y)] {
                best = best.max(hyperbolic_distance(z, &PointH::raw(p.0, p.1)));
            }
        }
        ((best + 0.05) * 4.0).ceil() / 4.0
    }
}

/// Radial panels in `v` for `r = R e^{−v}`, each with a Gauss–Legendre rule.
const RADIAL_BREAKS: [f64; 10] = [0.0, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 36.0];
const RADIAL_NODES: usize = 20;
const ANGULAR_NODES: usize = 96;

/// `R_s f(z) = −∫_ℍ G_s(u(z, w)/4) f(w) dw` for `f` supported in `support`.
///
/// Geodesic polar coordinates `w = exp_z(r, θ)` with `dw = sinh r dr dθ`
/// and `r = R e^{−v}`: the logarithmic singularity at `r = 0` becomes an
/// exponentially decaying integrand in `v`. The `v`-panels use Gauss–Legendre
/// rules and `θ` the periodic trapezoid rule; the nodes are fixed, so the
/// result depends smoothly on `z`, which finite differences of `R_s f` need.
pub fn resolvent_apply<T, F>(s: Complex64, f: F, support: &SupportBox, z: &PointH) -> Result<Vec<Complex64>>
where
    T: Into<Vec<Complex64>>,
    F: Fn(&PointH) -> T,
{
    if !(s.re > 0.0) {
        return Err(Error::Domain(format!("the resolvent needs Re s > 0, got {s}")));
    }
    support.validate()?;
    let radius = support.enclosing_radius(z);
    let mut acc: Option<Vec<Complex64>> = None;
    for pair in RADIAL_BREAKS.windows(2) {
        for (v, wv) in gauss_legendre_interval(RADIAL_NODES, pair[0], pair[1]) {
            let r = radius * (-v).exp();
            let u = 4.0 * (0.5 * r).sinh().powi(2);
            let g = resolvent_green(s, u / 4.0)?;
            // dr = r dv; measure sinh r dr dθ; the angular mean carries 2π.
            let weight = -g * wv * r * r.sinh() * TAU / ANGULAR_NODES as f64;
            for k in 0..ANGULAR_NODES {
                let theta = TAU * k as f64 / ANGULAR_NODES as f64;
                let val: Vec<Complex64> = f(&exp_point(z, r, theta)).into();
                let a = acc.get_or_insert_with(|| vec![c(0.0); val.len()]);
                if a.len() != val.len() {
                    return Err(Error::Domain("test function changed its output length".into()));
                }
                for (x, y) in a.iter_mut().zip(&val) {
                    *x += y * weight;
                }
            }
        }
    }
    Ok(acc.unwrap_or_default())
}

/// `Δf(z) ≈ −y²(f(x+h) + f(x−h) + f(y+h) + f(y−h) − 4f(z))/h²`.
pub fn laplacian_fd<T, F>(f: F, z: &PointH, h: f64) -> Result<Vec<Complex64>>
where
    T: Into<Vec<Complex64>>,
    F: Fn(&PointH) -> T,
{
    if !(h > 0.0) || h >= z.y() {
        return Err(Error::Domain(format!("step {h} must be positive and below Im z = {}", z.y())));
    }
    let at = |dx: f64, dy: f64| -> Vec<Complex64> { f(&PointH::raw(z.x() + dx, z.y() + dy)).into() };
    let centre = at(0.0, 0.0);
    let mut out = vec![c(0.0); centre.len()];
    for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
        let v = at(dx, dy);
        if v.len() != centre.len() {
            return Err(Error::Domain("function changed its output length".into()));
        }
        for (o, x) in out.iter_mut().zip(&v) {
            *o += x;
        }
    }
    let scale = -z.y() * z.y() / (h * h);
    Ok(out.iter().zip(&centre).map(|(o, f0)| (o - 4.0 * f0) * scale).collect())
}

/// `(s(1−s) − Δ)f(z)` by [`laplacian_fd`]: zero for eigenfunctions of weight
/// `s`, and `f` itself when applied to `R_s f`.
pub fn helmholtz_fd<T, F>(f: F, z: &PointH, h: f64, s: Complex64) -> Result<Vec<Complex64>>
where
    T: Into<Vec<Complex64>>,
    F: Fn(&PointH) -> T,
{
    let lambda = s * (1.0 - s);
    let centre: Vec<Complex64> = f(z).into();
    let lap = laplacian_fd(&f, z, h)?;
    Ok(centre.iter().zip(&lap).map(|(f0, l)| lambda * f0 - l).collect())
}

/// `‖K(γz, τw) − χ(γ)K(z, w)χ(τ⁻¹)‖_F` for ball entries `γ`, `τ`.
pub fn equivariance_defect(
    table: &BallTable,
    k: &PointPairKernel,
    z: &PointH,
    w: &PointH,
    gamma: &Word,
    tau: &Word,
) -> Result<EquivarianceReport> {
    let (g, t) = (rep_word_element(table, gamma)?, rep_word_element(table, tau)?);
    let base = table.sum(k, z, w)?;
    let moved = table.sum(k, &moebius_apply(&g.1, z), &moebius_apply(&t.1, w))?;
    let chi_t_inv = t.0.clone().try_inverse().ok_or_else(|| Error::Representation("singular image".into()))?;
    let expected = &g.0 * &base.value * &chi_t_inv;
    // Both sums carry their own truncation error; the base one is carried
    // through the conjugation by χ.
    let carried = operator_norm(&g.0) * operator_norm(&chi_t_inv) * base.shell_error;
    Ok(EquivarianceReport {
        defect: frobenius(&(&moved.value - &expected)),
        shell_error: moved.shell_error + carried,
        scale: frobenius(&base.value),
    })
}

fn rep_word_element(table: &BallTable, w: &Word) -> Result<(CMat, GroupElement)> {
    let i = table
        .words
        .iter()
        .position(|x| x == w)
        .ok_or_else(|| Error::Domain(format!("word {w} is not in the ball of radius {}", table.word_length)))?;
    Ok((table.chi[i].clone(), table.elements[i]))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EquivarianceReport {
    pub defect: f64,
    /// Shell estimate of the moved sum plus that of the base sum scaled by
    /// `‖χ(γ)‖‖χ(τ)⁻¹‖`.
    pub shell_error: f64,
    pub scale: f64,
}

/// `Γ(σ − ½)√π/Γ(σ)`, the `t`-integral of `(t² + 1)^{−σ}`.
pub fn power_strip_constant(sigma: f64) -> Result<f64> {
    Ok((c(0.5 * PI.ln()) + log_gamma(c(sigma - 0.5))? - log_gamma(c(sigma))?).exp().re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::builtin_group;
    use crate::linalg::{max_abs, max_abs_diff};
    use crate::representation::{builtin_representation, fixed_space_projection};
    use crate::special::green_kernel;

    fn gamma2() -> GroupData {
        builtin_group("gamma2").unwrap()
    }

    fn p(x: f64, y: f64) -> PointH {
        PointH::new(x, y).unwrap()
    }

    const BUMP: PointPairKernel = PointPairKernel::SmoothBump { u_max: 4.0 };

    #[test]
    fn strip_integrals_match_quadrature() {
        for (a, b) in [(0.7, 1.3), (2.0, 0.1), (5.0, 5.0)] {
            let k = PointPairKernel::PowerDecay { sigma: 2.3 };
            let closed = k.strip_integral(a, b).unwrap();
            let num = integrate_to_infinity(|t: f64| k.value((t * t + (a - b) * (a - b)) / (a * b)).unwrap(), 0.0, QuadOptions::rel(1e-12));
            assert!((closed - 2.0 * num.value).norm() < 1e-10 * closed.norm(), "{a} {b}");
            let brute: f64 = (-40000..40000).map(|i| i as f64 * 1e-3).map(|t| bump((t * t + (a - b) * (a - b)) / (a * b) / 4.0) * 1e-3).sum();
            assert!((BUMP.strip_integral(a, b).unwrap().re - brute).abs() < 1e-8, "{a} {b}");
        }
        assert_eq!(BUMP.strip_integral(10.0, 0.1).unwrap(), c(0.0));
        assert_eq!(PointPairKernel::Zero.strip_integral(1.0, 2.0).unwrap(), c(0.0));
    }

    #[test]
    fn parabolic_sums_match_brute_force() {
        let sigma = 1.7;
        let k = PointPairKernel::PowerDecay { sigma };
        // Both sides of the Poisson switch, trivial and twisted characters.
        for (dx, a, b) in [(0.3, 0.8, 1.1), (-0.45, 5.5, 5.9), (0.2, 6.5, 6.0), (0.1, 30.0, 0.4)] {
            for nu in [0.0, 0.3] {
                let fast = k.parabolic_sum(dx, a, b, nu).unwrap();
                let (ab, d2) = (a * b, (a - b) * (a - b));
                let g = |m: i64| e(m as f64 * nu) * k.value(((dx + m as f64).powi(2) + d2) / ab).unwrap();
                let big = 2_000_000i64;
                let mut brute: Complex64 = (-big..=big).map(g).sum();
                if nu == 0.0 {
                    brute += c(ab.powf(sigma) * 2.0 * power_tail(sigma, d2 + ab, big as f64 + 0.5));
                }
                assert!((fast - brute).norm() < 1e-8 * brute.norm().max(1e-3), "{dx} {a} {b} {nu}: {fast} {brute}");
            }
        }
        let fast = BUMP.parabolic_sum(0.3, 2.0, 1.5, 0.2).unwrap();
        let brute: Complex64 = (-50..50).map(|m| e(m as f64 * 0.2) * BUMP.value(((0.3 + m as f64).powi(2) + 0.25) / 3.0).unwrap()).sum();
        assert!((fast - brute).norm() < 1e-14);
    }

    #[test]
    fn green_difference_is_finite_at_the_diagonal() {
        let k = PointPairKernel::GreenDifference { a: c(1.5), b: c(2.5) };
        let v0 = k.value(0.0).unwrap();
        let v1 = k.value(1e-9).unwrap();
        assert!(v0.is_finite() && (v0 - v1).norm() < 1e-6);
        let h = 1e-5;
        let fd = (k.value(0.5 + h).unwrap() - k.value(0.5 - h).unwrap()) / (2.0 * h);
        assert!((fd - k.derivative(0.5).unwrap()).norm() < 1e-6);
    }

    #[test]
    fn ball_sum_trivial_cases() {
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        let (z, w) = (p(0.1, 1.2), p(-0.3, 0.8));
        let zero = automorphic_kernel(&g, &r, &PointPairKernel::Zero, &z, &w, 4).unwrap();
        assert_eq!(max_abs(&zero.value), 0.0);
        let k = PointPairKernel::PowerDecay { sigma: 2.0 };
        let v = automorphic_kernel(&g, &r, &k, &z, &w, 0).unwrap();
        let expect = CMat::identity(2, 2) * k.value(point_pair_invariant(&z, &w)).unwrap();
        assert!(max_abs_diff(&v.value, &expect) < 1e-15);
    }

    #[test]
    fn parabolic_decomposition_matches_ball_sum() {
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        let op = KernelOperator::new(&g, &r, BUMP, 5).unwrap();
        let table = BallTable::new(&g, &r, 7).unwrap();
        for (z, w) in [(p(0.1, 1.2), p(-0.3, 0.8)), (p(0.4, 0.6), p(0.2, 1.9))] {
            let ball = table.sum(&BUMP, &z, &w).unwrap();
            assert_eq!(ball.shell_error, 0.0);
            for b in 0..3 {
                assert!(max_abs_diff(&op.kernel_via(b, &z, &w).unwrap(), &ball.value) < 1e-13);
                assert!(max_abs_diff(&op.kernel_via_right(b, &z, &w).unwrap(), &ball.value) < 1e-13);
            }
        }
    }

    #[test]
    fn kernel_is_hermitian_for_unitary_twists() {
        // K(z, w) = K(w, z)* holds for unitary χ; the mirrored decomposition
        // keeps it on the truncated sums, also with one point deep in a cusp.
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        let op = KernelOperator::new(&g, &r, PointPairKernel::PowerDecay { sigma: 2.0 }, 3).unwrap();
        let deep = moebius_apply(&g.cusp(1).unwrap().sigma, &p(0.3, 7.0));
        for (z, w) in [(p(0.1, 1.2), deep), (p(0.1, 5.0), deep), (p(0.4, 0.6), p(0.2, 1.9))] {
            let (a, b) = (op.kernel(&z, &w).unwrap(), op.kernel(&w, &z).unwrap());
            assert!(max_abs_diff(&a, &b.adjoint()) < 1e-12 * max_abs(&a).max(1.0), "{z} {w}");
        }
    }

    #[test]
    fn deep_cusp_kernel_is_dominated_by_the_stabilizer() {
        // z = w high in the cusp at ∞: K ≈ Σ_m k(z, z + 2m).
        let g = gamma2();
        let r = Representation::trivial(&g);
        let k = PointPairKernel::PowerDecay { sigma: 2.0 };
        let z = p(0.2, 20.0);
        let full = BallTable::new(&g, &r, 6).unwrap().sum(&k, &z, &z).unwrap().value[(0, 0)];
        // The ball holds T^{2m} for |m| ≤ 6; every other term is tiny.
        let stab: Complex64 = (-6..=6).map(|m| k.value(point_pair_invariant(&z, &p(0.2 + 2.0 * m as f64, 20.0))).unwrap()).sum();
        assert!((full - stab).norm() < 1e-3 * full.norm());
    }

    #[test]
    fn zeroth_coefficient_of_k_is_the_principal_part() {
        let g = gamma2();
        for twist in ["trivial", "rotation_pair"] {
            let r = builtin_representation(&g, twist).unwrap();
            let op = KernelOperator::new(&g, &r, BUMP, 5).unwrap();
            let w = p(0.2, 0.9);
            for a in 0..3 {
                for y in [0.7, 1.3] {
                    let zc = op.kernel_zeroth_coefficient(&g, a, y, &w, 1e-11).unwrap();
                    let z = moebius_apply(&g.cusp(a).unwrap().sigma, &p(0.0, y));
                    let h = op.principal_part(a, &z, &w).unwrap();
                    assert!(max_abs_diff(&zc, &h) < 1e-9, "{twist} {a} {y}");
                }
            }
        }
    }

    #[test]
    fn principal_part_vanishes_when_it_should() {
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        assert_eq!(max_abs(&fixed_space_projection(&g, &r, 2).unwrap()), 0.0);
        let k = PointPairKernel::PowerDecay { sigma: 3.0 };
        let (z, w) = (p(0.1, 1.2), p(-0.3, 0.8));
        assert_eq!(max_abs(&principal_part(&g, &r, &k, 2, &z, &w, 3).unwrap()), 0.0);
        // A narrow bump cannot reach from height 30 to the orbit of w.
        let narrow = PointPairKernel::SmoothBump { u_max: 0.5 };
        let high = moebius_apply(&g.cusp(0).unwrap().sigma, &p(0.0, 30.0));
        assert_eq!(max_abs(&principal_part(&g, &r, &narrow, 0, &high, &w, 3).unwrap()), 0.0);
    }

    fn nonsingular_twist(g: &GroupData) -> Representation {
        let d = |a: f64, b: f64| CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![e(a), e(b)]));
        let (cs, sn) = (0.8f64.cos(), 0.8f64.sin());
        let v = CMat::from_row_slice(2, 2, &[c(cs), c(-sn), c(sn), c(cs)]);
        let gi = &v * d(0.2, 0.45) * v.adjoint();
        Representation::from_half(g, vec![(0, d(0.1, 0.3)), (2, gi)]).unwrap()
    }

    #[test]
    fn compact_part_equals_kernel_without_singular_cusps() {
        let g = gamma2();
        let r = nonsingular_twist(&g);
        for a in 0..3 {
            assert_eq!(max_abs(&fixed_space_projection(&g, &r, a).unwrap()), 0.0);
        }
        let op = KernelOperator::new(&g, &r, PointPairKernel::PowerDecay { sigma: 2.5 }, 3).unwrap();
        let (z, w) = (p(0.1, 1.2), p(-0.3, 0.8));
        assert_eq!(op.compact_part(&z, &w).unwrap(), op.kernel(&z, &w).unwrap());
    }

    #[test]
    fn kernel_equivariance_within_shell_estimate() {
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        let k = PointPairKernel::PowerDecay { sigma: 4.0 };
        let table = BallTable::new(&g, &r, 7).unwrap();
        let (z, w) = (p(0.1, 1.2), p(-0.3, 0.8));
        for (a, b) in [(0usize, 2usize), (1, 3), (2, 0)] {
            let rep = equivariance_defect(&table, &k, &z, &w, &g.word(vec![a]).unwrap(), &g.word(vec![b]).unwrap()).unwrap();
            assert!(rep.defect <= 2.0 * rep.shell_error, "{rep:?}");
        }
    }

    #[test]
    fn compact_part_bounded_along_cusp_rays() {
        let g = gamma2();
        let r = Representation::trivial(&g);
        let op = KernelOperator::new(&g, &r, PointPairKernel::PowerDecay { sigma: 2.0 }, 4).unwrap();
        let z = p(0.1, 1.2);
        for a in 0..3 {
            let sigma = g.cusp(a).unwrap().sigma;
            let norms: Vec<f64> =
                [2.0, 4.0, 8.0, 16.0].iter().map(|&y| frobenius(&op.compact_part(&z, &moebius_apply(&sigma, &p(0.3, y))).unwrap())).collect();
            assert!(norms.iter().all(|n| n.is_finite() && *n < 10.0), "{a} {norms:?}");
            assert!(norms[3] <= norms[0] * 1.5 + 1e-3, "{a} {norms:?}");
        }
    }

    #[test]
    fn compact_part_zeroth_coefficient_is_the_cross_cusp_remainder() {
        // ∫₀¹ P_a K̂(σ_a(x+iy), w) dx = −Σ_{b≠a} ∫₀¹ P_a H_b(σ_a(x+iy), w) dx:
        // the principal part at a cancels exactly, and the cross-cusp
        // remainder stays bounded (it does not vanish) as y grows.
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        let op = KernelOperator::new(&g, &r, PointPairKernel::PowerDecay { sigma: 2.0 }, 4).unwrap();
        let w = p(0.2, 0.9);
        for a in 0..2 {
            let sigma = g.cusp(a).unwrap().sigma;
            let proj = op.projection(a).unwrap();
            let mut first = f64::INFINITY;
            for y in [4.0, 8.0, 16.0] {
                let zc = op.kernel_zeroth_coefficient(&g, a, y, &w, 1e-11).unwrap();
                let h = op.principal_part(a, &moebius_apply(&sigma, &p(0.0, y)), &w).unwrap();
                assert!(max_abs_diff(&zc, &h) < 1e-5 * max_abs(&h).max(1.0), "{a} {y}");
                let mut cross = zeros(2);
                for b in (0..3).filter(|&b| b != a) {
                    let nodes = 32;
                    for i in 0..nodes {
                        let z = moebius_apply(&sigma, &p((i as f64 + 0.5) / nodes as f64, y));
                        cross += &proj * op.principal_part(b, &z, &w).unwrap() / c(nodes as f64);
                    }
                }
                let size = max_abs(&cross);
                assert!(size.is_finite() && (first.is_infinite() || size <= 1.5 * first), "{a} {y}: {size} {first}");
                if first.is_infinite() {
                    first = size;
                }
            }
        }
    }

    #[test]
    fn grids_cover_the_fundamental_domain() {
        for name in ["gamma2", "square_torus"] {
            let g = builtin_group(name).unwrap();
            let spec = GridSpec::default();
            let grid = QuadratureGrid::new(&g, spec.refined(2)).unwrap();
            let expect = TAU - g.cusps().len() as f64 / spec.y_max;
            assert!((grid.total_weight() - expect).abs() < 0.01 * expect, "{name} {}", grid.total_weight());
            assert!(grid.nodes.iter().all(|(_, w)| *w > 0.0));
        }
        assert!(QuadratureGrid::new(&gamma2(), GridSpec { y_max: 1.0, ..GridSpec::default() }).is_err());
    }

    #[test]
    fn hs_and_probe_trivial_cases() {
        let g = gamma2();
        let r = Representation::trivial(&g);
        let grid = QuadratureGrid::new(&g, GridSpec { nx: 6, ny: 6, strip_nx: 2, strip_ny: 2, ..GridSpec::default() }).unwrap();
        let zero = KernelOperator::new(&g, &r, PointPairKernel::Zero, 2).unwrap();
        assert_eq!(hs_norm_estimate(&zero, &grid).unwrap(), 0.0);
        assert!(kernel_spectrum_probe(&zero, &grid).unwrap().iter().all(|z| *z == c(0.0)));
        let bump = KernelOperator::new(&g, &r, BUMP, 3).unwrap();
        let hs = hs_norm_estimate(&bump, &grid).unwrap();
        assert!(hs > 0.0 && hs.is_finite());
        let mut big = grid.clone();
        big.nodes = vec![grid.nodes[0]; PROBE_MAX_NODES + 1];
        assert!(matches!(kernel_spectrum_probe(&bump, &big), Err(Error::Limit(_))));
    }

    #[test]
    fn annihilation_surrogate() {
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        let op = KernelOperator::new(&g, &r, PointPairKernel::PowerDecay { sigma: 2.5 }, 3).unwrap();
        let v = [c(1.0), Complex64::new(0.5, -0.25)];
        for mode in [1, -2, 5] {
            let (pair, norm) = annihilation_pairing(&op, 0, &p(0.1, 1.3), mode, (0.8, 3.0), &v).unwrap();
            assert!(norm > 0.0 && pair <= 1e-4 * norm, "{mode}: {pair} {norm}");
        }
        assert!(annihilation_pairing(&op, 0, &p(0.1, 1.3), 0, (0.8, 3.0), &v).is_err());
    }

    #[test]
    fn zeroth_coefficient_examples() {
        let g = gamma2();
        let r = builtin_representation(&g, "rotation_pair").unwrap();
        let v = vec![Complex64::new(1.0, 0.5), c(-2.0)];
        let got = zeroth_coefficient(&g, &r, |_| v.clone(), 0, 1.1).unwrap();
        let pv = fixed_space_projection(&g, &r, 0).unwrap() * nalgebra::DVector::from_vec(v.clone());
        assert!(got.iter().zip(pv.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
        // A pure mode in the cusp coordinate integrates to zero.
        let sigma_inv = g.cusp(0).unwrap().sigma.inverse();
        let mode = |z: &PointH| {
            let x = moebius_apply(&sigma_inv, z).x();
            vec![e(3.0 * x), e(-x)]
        };
        let got = zeroth_coefficient(&g, &r, mode, 0, 0.9).unwrap();
        assert!(got.iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn laplacian_examples() {
        let s = 2.5;
        let z = p(0.3, 1.7);
        let f = |w: &PointH| vec![c(w.y().powf(s))];
        let lap = laplacian_fd(f, &z, 1e-3).unwrap()[0];
        let expect = s * (1.0 - s) * z.y().powf(s);
        assert!((lap.re - expect).abs() < 1e-6 * expect.abs());
        assert!(laplacian_fd(|w: &PointH| vec![c(w.x())], &z, 1e-3).unwrap()[0].norm() < 1e-8);
        assert_eq!(laplacian_fd(|_: &PointH| vec![c(2.0)], &z, 1e-3).unwrap()[0], c(0.0));
        assert!(laplacian_fd(|_: &PointH| vec![c(2.0)], &z, 2.0).is_err());
    }

    #[test]
    fn green_kernel_is_an_eigenfunction_in_the_quartered_invariant() {
        let s = Complex64::new(1.7, 0.4);
        let w = p(-0.2, 0.9);
        for z in [p(0.3, 1.1), p(1.5, 0.4), p(-0.9, 2.5)] {
            let good = helmholtz_fd(|q: &PointH| vec![green_kernel(s, q, &w).unwrap()], &z, 1e-3, s).unwrap()[0];
            let scale = (s * (1.0 - s) * green_kernel(s, &z, &w).unwrap()).norm();
            assert!(good.norm() < 1e-4 * scale, "{z}: {}", good.norm() / scale);
            // Without the quarter the equation fails by a wide margin.
            let bad =
                helmholtz_fd(|q: &PointH| vec![resolvent_green(s, point_pair_invariant(q, &w)).unwrap()], &z, 1e-3, s).unwrap()[0];
            let scale = (s * (1.0 - s) * resolvent_green(s, point_pair_invariant(&z, &w)).unwrap()).norm();
            assert!(bad.norm() > 1e-2 * scale);
        }
    }

    #[test]
    fn resolvent_inverts_the_helmholtz_operator() {
        let s = Complex64::new(1.6, 0.3);
        let support = SupportBox { x0: -0.5, x1: 0.5, y0: 0.6, y1: 1.8 };
        let f = |w: &PointH| vec![c(support.bump(w)), Complex64::new(0.0, 0.5 * support.bump(w) * w.x())];
        for z in [p(0.0, 1.0), p(0.2, 1.3), p(-0.25, 0.9)] {
            let lhs = helmholtz_fd(|q: &PointH| resolvent_apply(s, f, &support, q).unwrap(), &z, 1e-3, s).unwrap();
            let rhs = f(&z);
            let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let norm = rhs.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 5e-2 * norm, "{z}: {err} {norm}");
        }
        let zero = resolvent_apply(s, |_: &PointH| vec![c(0.0)], &support, &p(0.0, 1.0)).unwrap();
        assert_eq!(zero, vec![c(0.0)]);
        let one = resolvent_apply(s, |w: &PointH| vec![c(support.bump(w))], &support, &p(0.1, 1.0)).unwrap()[0];
        let three = resolvent_apply(s, |w: &PointH| vec![c(3.0 * support.bump(w))], &support, &p(0.1, 1.0)).unwrap()[0];
        assert!((three - 3.0 * one).norm() < 1e-10 * three.norm());
    }
}
