//! The twist χ: generator images, cusp data and norm growth.

use nalgebra::Complex;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{enumerate_ball, tranche_bound_check, GroupData, Word};
use crate::hyperbolic::frobenius_mu;
use crate::linalg::{e, identity, max_abs_diff, zeros, CMat};

const UNITARY_TOL: f64 = 1e-9;
const EIGEN_GROUP_TOL: f64 = 1e-9;

/// One invertible `n×n` matrix per generator, with `image(i⁻¹) = image(i)⁻¹`.
#[derive(Clone, Debug)]
pub struct Representation {
    dim: usize,
    images: Vec<CMat>,
}

impl Representation {
    /// Takes an image for every generator and validates inverse consistency
    /// and any relations carried by the group.
    pub fn new(group: &GroupData, images: Vec<CMat>) -> Result<Self> {
        if images.len() != group.generator_count() {
            return Err(Error::Representation(format!(
                "{} images for {} generators",
                images.len(),
                group.generator_count()
            )));
        }
        let dim = images[0].nrows();
        if dim == 0 {
            return Err(Error::Representation("dimension must be positive".into()));
        }
        for (i, m) in images.iter().enumerate() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::Representation(format!("image {i} is not {dim}×{dim}")));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Representation(format!("image {i} has non-finite entries")));
            }
        }
        for i in 0..images.len() {
            let j = group.inverse_index(i);
            let p = &images[i] * &images[j];
            if max_abs_diff(&p, &identity(dim)) > 1e-10 {
                return Err(Error::Representation(format!("image({i})·image({j}) is not the identity")));
            }
        }
        let rep = Self { dim, images };
        for w in group.relations() {
            if max_abs_diff(&rep_of_word(&rep, w)?, &identity(dim)) > 1e-8 {
                return Err(Error::Representation(format!("relation {w} is not respected")));
            }
        }
        Ok(rep)
    }

    /// Builds images from those of one generator in each inverse pair; the
    /// partner images are the matrix inverses.
    pub fn from_half(group: &GroupData, given: Vec<(usize, CMat)>) -> Result<Self> {
        let n = group.generator_count();
        let mut images: Vec<Option<CMat>> = vec![None; n];
        for (i, m) in given {
            if i >= n {
                return Err(Error::InvalidIndex { index: i, count: n });
            }
            let inv = m
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Representation(format!("image of generator {i} is singular")))?;
            let j = group.inverse_index(i);
            if images[i].is_some() || images[j].is_some() {
                return Err(Error::Representation(format!("generator {i} or its inverse given twice")));
            }
            images[i] = Some(m);
            images[j] = Some(inv);
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| Error::Representation(format!("no image for generator {i}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(group, images)
    }

    pub fn trivial(group: &GroupData) -> Self {
        Self { dim: 1, images: vec![identity(1); group.generator_count()] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn image(&self, i: usize) -> &CMat {
        &self.images[i]
    }

    pub fn images(&self) -> &[CMat] {
        &self.images
    }
}

/// Ordered product of generator images.
pub fn rep_of_word(rep: &Representation, w: &Word) -> Result<CMat> {
    let mut m = identity(rep.dim);
    for &l in w.letters() {
        let g = rep.images.get(l).ok_or(Error::InvalidIndex { index: l, count: rep.images.len() })?;
        m = &m * g;
    }
    Ok(m)
}

/// `χ(w)⁻¹`, evaluated through the inverse word.
pub fn rep_of_inverse_word(group: &GroupData, rep: &Representation, w: &Word) -> Result<CMat> {
    rep_of_word(rep, &group.inverse_word(w))
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitarityReport {
    pub unitary_at_cusps: bool,
    /// `max |U*U − I|` per cusp.
    pub defects: Vec<f64>,
}

pub fn check_unitary_at_cusps(group: &GroupData, rep: &Representation) -> Result<UnitarityReport> {
    let mut defects = Vec::new();
    for c in group.cusps() {
        let u = rep_of_word(rep, &c.stabilizer_word)?;
        defects.push(max_abs_diff(&(u.adjoint() * &u), &identity(rep.dim)));
    }
    Ok(UnitarityReport { unitary_at_cusps: defects.iter().all(|&d| d <= UNITARY_TOL), defects })
}

/// Spectral data of `χ(γ_b)`: `ν₁ = 0` is always listed, possibly with a zero
/// projection; the remaining `ν_j ∈ (0, 1)` ascend.
#[derive(Clone, Debug)]
pub struct CuspEigenData {
    pub nu: Vec<f64>,
    pub projections: Vec<CMat>,
}

impl CuspEigenData {
    /// Reassembles `Σ e(ν_j) P_j`.
    pub fn reconstruct(&self) -> CMat {
        let n = self.projections[0].nrows();
        self.nu.iter().zip(&self.projections).fold(zeros(n), |acc, (&nu, p)| acc + p * e(nu))
    }
}

/// Unitary eigendecomposition of `χ(γ_b)` by complex Schur factorization.
pub fn cusp_eigendata(group: &GroupData, rep: &Representation, cusp: usize) -> Result<CuspEigenData> {
    let u = rep_of_word(rep, &group.cusp(cusp)?.stabilizer_word)?;
    if max_abs_diff(&(u.adjoint() * &u), &identity(rep.dim)) > UNITARY_TOL {
        return Err(Error::NotUnitary(cusp));
    }
    unitary_eigendata(&u)
}

/// Eigendata of a unitary matrix; see [`cusp_eigendata`].
pub fn unitary_eigendata(u: &CMat) -> Result<CuspEigenData> {
    let n = u.nrows();
    let (q, t) = u.clone().schur().unpack();
    let mut modes: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let lambda: Complex64 = t[(i, i)];
            let mut nu = lambda.arg() / std::f64::consts::TAU;
            if nu < 0.0 {
                nu += 1.0;
            }
            if nu >= 1.0 - EIGEN_GROUP_TOL || nu < EIGEN_GROUP_TOL {
                nu = 0.0;
            }
            (nu, i)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nu: Vec<f64> = vec![0.0];
    let mut projections: Vec<CMat> = vec![zeros(n)];
    for (v, i) in modes {
        let col = q.column(i);
        let p = &col * col.adjoint();
        if v == 0.0 {
            projections[0] += p;
        } else if nu.len() > 1 && (v - nu[nu.len() - 1]).abs() <= EIGEN_GROUP_TOL {
            *projections.last_mut().expect("nonempty") += p;
        } else {
            nu.push(v);
            projections.push(p);
        }
    }
    Ok(CuspEigenData { nu, projections })
}

/// Orthogonal projection onto the `χ(γ_a)`-fixed vectors; zero when `χ` is
/// non-singular at the cusp.
pub fn fixed_space_projection(group: &GroupData, rep: &Representation, cusp: usize) -> Result<CMat> {
    Ok(cusp_eigendata(group, rep, cusp)?.projections.swap_remove(0))
}

/// Largest singular value by power iteration on `M*M`, from two fixed
/// starting vectors.
pub fn operator_norm(m: &CMat) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let a = m.adjoint() * m;
    let starts = [
        nalgebra::DVector::from_element(n, Complex::new(1.0, 0.0)),
        nalgebra::DVector::from_fn(n, |i, _| Complex::new(1.0 + i as f64, 0.5 - 0.3 * i as f64)),
    ];
    let mut best = 0.0f64;
    for mut v in starts {
        let norm = v.norm();
        v /= Complex::new(norm, 0.0);
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let w = &a * &v;
            let next = w.norm();
            if next == 0.0 {
                lambda = 0.0;
                break;
            }
            v = w / Complex::new(next, 0.0);
            let done = (next - lambda).abs() <= 1e-12 * next;
            lambda = next;
            if done {
                break;
            }
        }
        best = best.max(lambda);
    }
    best.sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    /// Exponent with `‖χ(γ)‖ ≤ constant·μ(γ)^{σ₀−1}` on the ball; at least `1 + 1e-6`.
    pub sigma0: f64,
    pub constant: f64,
    pub max_word_length_used: usize,
    /// Unclamped least-squares slope of `log‖χ‖` against `log μ`.
    pub slope: f64,
    pub samples: usize,
    /// `max_j ‖χ(γ_j)‖`.
    pub generator_norm_max: f64,
    /// Supremum of `k/(log μ + 1)` over traced normal presentations.
    pub tranche_ratio: f64,
    /// `1 + tranche_ratio·log(generator_norm_max)`.
    pub sigma0_from_tranches: f64,
    /// `max ‖χ(γ)‖/(c² + d²)^{σ₀−1}` in the coordinates of the first cusp.
    pub cusp_row_constant: f64,
}

pub fn fit_growth_exponent(group: &GroupData, rep: &Representation, max_len: usize) -> Result<GrowthFit> {
    fit_growth_with_tranche_ratio(group, rep, max_len, None)
}

/// As [`fit_growth_exponent`], reusing a known tranche ratio instead of
/// tracing the ball again.
pub fn fit_growth_with_tranche_ratio(
    group: &GroupData,
    rep: &Representation,
    max_len: usize,
    tranche_ratio: Option<f64>,
) -> Result<GrowthFit> {
    if !check_unitary_at_cusps(group, rep)?.unitary_at_cusps {
        return Err(Error::Representation("growth fit needs a representation unitary at the cusps".into()));
    }
    let ball = enumerate_ball(group, max_len);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows = Vec::new();
    let si = group.cusps()[0].sigma.inverse();
    for (w, g) in ball.iter().skip(1) {
        xs.push(frobenius_mu(g).ln());
        ys.push(operator_norm(&rep_of_word(rep, w)?).ln());
        let t = si.mul(g);
        rows.push(t.c() * t.c() + t.d() * t.d());
    }
    let n = xs.len() as f64;
    let slope = if xs.is_empty() {
        0.0
    } else {
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    };
    let sigma0 = (1.0 + slope).max(1.0 + 1e-6);
    let shift = xs.iter().zip(&ys).map(|(x, y)| y - (sigma0 - 1.0) * x).fold(0.0f64, f64::max);
    let cusp_row_constant = ys
        .iter()
        .zip(&rows)
        .map(|(y, r)| (y - (sigma0 - 1.0) * r.ln()).exp())
        .fold(0.0f64, f64::max);
    let generator_norm_max = rep.images.iter().map(operator_norm).fold(0.0, f64::max);
    let tranche_ratio = match tranche_ratio {
        Some(r) => r,
        None => tranche_bound_check(group, max_len)?.sup_ratio,
    };
    Ok(GrowthFit {
        sigma0,
        constant: shift.exp(),
        max_word_length_used: max_len,
        slope,
        samples: xs.len(),
        generator_norm_max,
        tranche_ratio,
        sigma0_from_tranches: 1.0 + tranche_ratio * generator_norm_max.ln(),
        cusp_row_constant,
    })
}

/// Names accepted by [`builtin_representation`].
pub const BUILTIN_TWISTS: &[&str] = &["trivial", "rotation_pair", "shear"];

/// Shipped twists.
///
/// - `trivial`: the 1-dimensional trivial representation, any group.
/// - `rotation_pair` (gamma2): `T² ↦ diag(1, e(1/5))`, `g ↦ V·diag(1, e(2/7))·V*`
///   with `V` a real rotation by 0.6 rad. Unitary, non-diagonalizable
///   simultaneously, singular at ∞ and 0 but not at 1.
/// - `shear` (square_torus): commuting upper-triangular images of `A` and `B`,
///   so the cusp stabilizer maps to the identity while `χ` itself is far from
///   unitary.
pub fn builtin_representation(group: &GroupData, name: &str) -> Result<Representation> {
    let c = |re: f64| Complex64::new(re, 0.0);
    match (name, group.name()) {
        ("trivial", _) => Ok(Representation::trivial(group)),
        ("rotation_pair", "gamma2") => {
            let (cs, sn) = (0.6f64.cos(), 0.6f64.sin());
            let v = CMat::from_row_slice(2, 2, &[c(cs), c(-sn), c(sn), c(cs)]);
            let t2 = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), e(0.2)]);
            let d = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), e(2.0 / 7.0)]);
            let g = &v * d * v.adjoint();
            Representation::from_half(group, vec![(0, t2), (2, g)])
        }
        ("shear", "square_torus") => {
            let x = CMat::from_row_slice(2, 2, &[c(1.6), c(0.5), c(0.0), c(0.625)]);
            let y = identity(2) * c(0.35) + &x * c(0.5);
            Representation::from_half(group, vec![(0, x), (2, y)])
        }
        _ => Err(Error::Representation(format!("no builtin twist `{name}` for group `{}`", group.name()))),
    }
}
