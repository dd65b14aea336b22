//! Twisted Eisenstein series: direct coset summation, the Fourier expansion
//! through matrix Kloosterman sums, the scattering matrix and growth checks.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{coset_representatives, CosetRep, DoubleCosetData, GroupData};
use crate::hyperbolic::{imaginary_of_action, moebius_apply, GroupElement, PointH};
use crate::linalg::{e, max_abs, tree_sum, zeros, CMat};
use crate::representation::{
    cusp_eigendata, fixed_space_projection, operator_norm, rep_of_word, CuspEigenData, GrowthFit, Representation,
};
use crate::special::{log_gamma, whittaker_freq};

/// Terms per parallel chunk; fixed so that the reduction order never depends
/// on the thread count.
const CHUNK: usize = 4096;

/// Multiple of the machine epsilon, relative to the summed term magnitudes,
/// below which a Kloosterman-weighted sum counts as an exact cancellation.
const CANCELLATION_ROUNDING: f64 = 64.0;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EisensteinParams {
    pub cusp_from: usize,
    pub s: Complex64,
    /// Word-length bound for the direct sum and the double-coset search.
    pub word_length: usize,
    pub c_max: f64,
    pub k_max: usize,
}

impl EisensteinParams {
    /// A warning when `Re s` does not exceed the fitted abscissa.
    pub fn abscissa_warning(&self, fit: &GrowthFit) -> Option<String> {
        (self.s.re <= fit.sigma0).then(|| {
            format!("Re s = {} does not exceed the fitted abscissa σ₀ = {}; the series may diverge", self.s.re, fit.sigma0)
        })
    }
}

/// `Im(z)^s = exp(s·log y)`.
pub fn height_power(y: f64, s: Complex64) -> Complex64 {
    (s * y.ln()).exp()
}

/// Coset representatives of `Γ_a\Γ` with the matrices `χ(γ⁻¹)P_a`
/// precomputed, for repeated direct evaluation.
#[derive(Clone, Debug)]
pub struct CosetTable {
    pub cusp: usize,
    pub word_length: usize,
    pub projection: CMat,
    /// `σ_a⁻¹γ` per representative.
    scaled: Vec<GroupElement>,
    weights: Vec<CMat>,
    shells: Vec<usize>,
}

impl CosetTable {
    pub fn new(group: &GroupData, rep: &Representation, cusp: usize, word_length: usize) -> Result<Self> {
        let projection = fixed_space_projection(group, rep, cusp)?;
        let reps = coset_representatives(group, cusp, word_length)?;
        Self::from_reps(group, rep, cusp, word_length, projection, &reps)
    }

    fn from_reps(
        group: &GroupData,
        rep: &Representation,
        cusp: usize,
        word_length: usize,
        projection: CMat,
        reps: &[CosetRep],
    ) -> Result<Self> {
        let sigma_inv = group.cusp(cusp)?.sigma.inverse();
        let weights = reps
            .par_iter()
            .map(|r| Ok(rep_of_word(rep, &group.inverse_word(&r.word))? * &projection))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cusp,
            word_length,
            projection,
            scaled: reps.iter().map(|r| sigma_inv.mul(&r.element)).collect(),
            weights,
            shells: reps.iter().map(|r| r.shell).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }

    /// Whether `P_a = 0`, in which case every evaluation is zero.
    pub fn non_singular(&self) -> bool {
        max_abs(&self.projection) == 0.0
    }

    fn sum_where(&self, z: &PointH, term: impl Fn(f64) -> Complex64 + Sync, keep: impl Fn(usize) -> bool + Sync) -> CMat {
        let n = self.projection.nrows();
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(self.shells[i])).collect();
        let parts: Vec<CMat> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = zeros(n);
                for &i in chunk {
                    let w = term(imaginary_of_action(&self.scaled[i], z));
                    if w != Complex64::new(0.0, 0.0) {
                        acc += &self.weights[i] * w;
                    }
                }
                acc
            })
            .collect();
        tree_sum(parts, n)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DirectValue {
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub value: CMat,
    /// Operator norm of the contribution of the outermost shell.
    pub shell_error: f64,
    pub cosets: usize,
    pub non_singular_cusp: bool,
}

/// `E_a(z, s, χ) = Σ_{γ∈Γ_a\Γ} Im(σ_a⁻¹γz)^s χ(γ⁻¹) P_a`, summed over a
/// precomputed coset table.
pub fn eisenstein_direct_with(table: &CosetTable, s: Complex64, z: &PointH) -> DirectValue {
    let term = |y: f64| height_power(y, s);
    let value = table.sum_where(z, term, |_| true);
    let last = table.word_length;
    let shell = table.sum_where(z, term, |sh| sh == last);
    DirectValue {
        value,
        shell_error: if last == 0 { 0.0 } else { operator_norm(&shell) },
        cosets: table.len(),
        non_singular_cusp: table.non_singular(),
    }
}

/// [`eisenstein_direct_with`] building the coset table on the fly.
pub fn eisenstein_direct(group: &GroupData, rep: &Representation, params: &EisensteinParams, z: &PointH) -> Result<DirectValue> {
    let table = CosetTable::new(group, rep, params.cusp_from, params.word_length)?;
    Ok(eisenstein_direct_with(&table, params.s, z))
}

#[derive(Clone, Debug, Serialize)]
pub struct IncompleteValue {
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub value: CMat,
    /// Cosets with `Im(σ_a⁻¹γz)` in the support.
    pub contributing: usize,
    /// True when the ball of radius `L + 2` adds no contributing coset.
    pub saturated: bool,
}

/// `E_a(z|ψ) = Σ ψ(Im(σ_a⁻¹γz)) χ(γ⁻¹) P_a` for `ψ` supported in `[lo, hi]`.
pub fn incomplete_eisenstein(
    group: &GroupData,
    rep: &Representation,
    cusp: usize,
    psi: impl Fn(f64) -> f64 + Sync,
    support: (f64, f64),
    z: &PointH,
    word_length: usize,
) -> Result<IncompleteValue> {
    let (lo, hi) = support;
    if !(lo > 0.0) || !(hi >= lo) {
        return Err(Error::Domain(format!("support [{lo}, {hi}] must satisfy 0 < A ≤ B")));
    }
    let table = CosetTable::new(group, rep, cusp, word_length + 2)?;
    let inside = |y: f64| (lo..=hi).contains(&y);
    let term = |y: f64| if inside(y) { Complex64::new(psi(y), 0.0) } else { Complex64::new(0.0, 0.0) };
    let value = table.sum_where(z, term, |sh| sh <= word_length);
    let mut contributing = 0;
    let mut late = 0;
    for i in 0..table.len() {
        if inside(imaginary_of_action(&table.scaled[i], z)) {
            if table.shells[i] <= word_length {
                contributing += 1;
            } else {
                late += 1;
            }
        }
    }
    Ok(IncompleteValue { value, contributing, saturated: late == 0 })
}

/// Double cosets of one cusp pair with `η(ω⁻¹) = χ(σ_aωσ_b⁻¹)⁻¹` precomputed.
#[derive(Clone, Debug)]
pub struct KloostermanTable {
    pub cusp_a: usize,
    pub cusp_b: usize,
    pub delta: bool,
    pub c_max: f64,
    pub word_length: usize,
    pub saturated: bool,
    c: Vec<f64>,
    /// `d/c` with `d` the actual lower-right entry of the stored `ω`.
    ratio: Vec<f64>,
    eta_inv: Vec<CMat>,
}

impl KloostermanTable {
    pub fn new(group: &GroupData, rep: &Representation, dc: &DoubleCosetData) -> Result<Self> {
        let eta_inv = dc
            .entries
            .par_iter()
            .map(|e| rep_of_word(rep, &group.inverse_word(&e.word)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cusp_a: dc.cusp_a,
            cusp_b: dc.cusp_b,
            delta: dc.delta,
            c_max: dc.c_max,
            word_length: dc.word_length,
            saturated: dc.saturated,
            c: dc.entries.iter().map(|e| e.c).collect(),
            ratio: dc.entries.iter().map(|e| e.omega.d() / e.omega.c()).collect(),
            eta_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.eta_inv.first().map_or(0, |m| m.nrows())
    }

    pub fn entries(&self) -> usize {
        self.c.len()
    }

    /// Same table restricted to moduli `c ≤ c_max`.
    pub fn truncated(&self, c_max: f64) -> Self {
        let keep: Vec<usize> = (0..self.c.len()).filter(|&i| self.c[i] <= c_max * (1.0 + 1e-12)).collect();
        Self {
            c_max,
            c: keep.iter().map(|&i| self.c[i]).collect(),
            ratio: keep.iter().map(|&i| self.ratio[i]).collect(),
            eta_inv: keep.iter().map(|&i| self.eta_inv[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// `Σ_i w_i(c_i) e(r·d_i/c_i) η(ω_i⁻¹)` over all stored classes.
    ///
    /// Entries that cancel to within rounding of the summed magnitudes are
    /// set to zero: such residues carry no information, and left in place
    /// they would dominate exponentially small mode terms.
    fn weighted_sum(&self, n: usize, r: f64, weight: impl Fn(f64) -> Complex64) -> CMat {
        let mut acc = zeros(n);
        let mut mass = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..self.c.len() {
            let w = weight(self.c[i]) * e(r * self.ratio[i]);
            acc += &self.eta_inv[i] * w;
            mass += self.eta_inv[i].map(|x| x.norm() * w.norm());
        }
        let cutoff = CANCELLATION_ROUNDING * f64::EPSILON;
        acc.zip_map(&mass, |v, m| if v.norm() <= cutoff * m { Complex64::new(0.0, 0.0) } else { v })
    }

    /// Tail estimate for `Σ_{c > c_max} c^{−2σ}‖η(ω⁻¹)‖`: the partial sums
    /// `W(C) = Σ_{c ≤ C}‖η‖` are fitted to `B·C^p` from `C = c_max/2` and
    /// `c_max`, and the tail integral is doubled for safety. Infinite when the
    /// fitted growth beats the decay.
    fn tail(&self, sigma: f64) -> f64 {
        let half = 0.5 * self.c_max;
        let (mut w_half, mut w_full) = (0.0, 0.0);
        for i in 0..self.c.len() {
            let nrm = operator_norm(&self.eta_inv[i]);
            w_full += nrm;
            if self.c[i] <= half {
                w_half += nrm;
            }
        }
        if w_full == 0.0 {
            return 0.0;
        }
        let p = if w_half > 0.0 { (w_full / w_half).log2().max(1.0) } else { 2.0 };
        if 2.0 * sigma <= p {
            return f64::INFINITY;
        }
        2.0 * w_full * p * self.c_max.powf(-2.0 * sigma) / (2.0 * sigma - p)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KloostermanValue {
    pub r: f64,
    pub c: f64,
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub value: CMat,
    pub classes: usize,
}

/// `S_{a,b}(r, c, χ) = Σ_{d(c)} e(r d/c) η(ω_{c,d}⁻¹)` over the stored classes
/// at modulus `c`.
pub fn kloosterman_sum(table: &KloostermanTable, r: f64, c: f64) -> Result<KloostermanValue> {
    let n = table.dim();
    let mut value = zeros(n);
    let mut classes = 0;
    for i in 0..table.c.len() {
        if crate::group::same_modulus(table.c[i], c) {
            value += &table.eta_inv[i] * e(r * table.ratio[i]);
            classes += 1;
        }
    }
    if classes == 0 {
        return Err(Error::MissingModulus(c));
    }
    Ok(KloostermanValue { r, c, value, classes })
}

/// Truncated matrix coefficient together with its reported tail bound.
#[derive(Clone, Debug, Serialize)]
pub struct Coefficient {
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub value: CMat,
    pub tail_bound: f64,
}

/// `√π Γ(s−½)/Γ(s)`.
fn constant_prefactor(s: Complex64) -> Result<Complex64> {
    Ok((Complex64::new(0.5 * std::f64::consts::PI.ln(), 0.0) + log_gamma(s - 0.5)? - log_gamma(s)?).exp())
}

/// `φ_{a,b}(s) = √π Γ(s−½)/Γ(s) · P_b Σ_{c ≤ c_max} c^{−2s} S_{a,b}(0, c, χ) P_a`.
///
/// The projection on the left is the one of the target cusp `b`: the
/// constant term arises from the `ν = 0` eigenspace of `χ(γ_b)`.
pub fn phi_constant(table: &KloostermanTable, p_a: &CMat, p_b: &CMat, s: Complex64) -> Result<Coefficient> {
    let n = p_a.nrows();
    if max_abs(p_a) == 0.0 || max_abs(p_b) == 0.0 {
        return Ok(Coefficient { value: zeros(n), tail_bound: 0.0 });
    }
    let pre = constant_prefactor(s)?;
    let sum = table.weighted_sum(n, 0.0, |c| (-2.0 * s * c.ln()).exp());
    let tail = pre.norm() * table.tail(s.re);
    Ok(Coefficient { value: p_b * sum * p_a * pre, tail_bound: tail })
}

/// `φ_{a,b,j}(f, s) = (π^s/Γ(s)) |f|^{s−1} P_j Σ_{c ≤ c_max} c^{−2s} S_{a,b}(f, c, χ) P_a`
/// at a frequency `f = m + ν_j ≠ 0`.
pub fn phi_mode(
    table: &KloostermanTable,
    eig_b: &CuspEigenData,
    p_a: &CMat,
    j: usize,
    f: f64,
    s: Complex64,
) -> Result<Coefficient> {
    if f == 0.0 {
        return Err(Error::Domain("mode coefficient needs a nonzero frequency".into()));
    }
    let p_j = eig_b
        .projections
        .get(j)
        .ok_or(Error::InvalidIndex { index: j, count: eig_b.projections.len() })?;
    let n = p_a.nrows();
    if max_abs(p_j) == 0.0 || max_abs(p_a) == 0.0 {
        return Ok(Coefficient { value: zeros(n), tail_bound: 0.0 });
    }
    let pre = (s * std::f64::consts::PI.ln() - log_gamma(s)? + (s - 1.0) * f.abs().ln()).exp();
    let sum = table.weighted_sum(n, f, |c| (-2.0 * s * c.ln()).exp());
    Ok(Coefficient { value: p_j * sum * p_a * pre, tail_bound: pre.norm() * table.tail(s.re) })
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierMode {
    /// Eigenindex `j` (0-based; 0 is the `ν = 0` space).
    pub j: usize,
    pub frequency: f64,
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub coefficient: CMat,
    pub tail_bound: f64,
}

/// The expansion
/// `E_a(σ_b z) = δ y^s P_a + φ_{a,b}(s) y^{1−s} + Σ_j Σ_m φ_{a,b,j}(m+ν_j, s) W_s((m+ν_j)z)`.
///
/// Frequencies are `m + ν_j` with `χ(γ_b) = Σ e(ν_j)P_j`: the right shift
/// `ω ↦ ω·n(1)` contributes `χ(γ_b)⁻¹ = Σ e(−ν_j)P_j`, which Poisson summation
/// turns into the dual frequencies `m + ν_j`.
#[derive(Clone, Debug, Serialize)]
pub struct FourierExpansion {
    pub cusp_a: usize,
    pub cusp_b: usize,
    pub s: Complex64,
    pub delta: bool,
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub p_a: CMat,
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub phi_ab: CMat,
    pub phi_tail_bound: f64,
    pub modes: Vec<FourierMode>,
    pub nu: Vec<f64>,
    pub c_max: f64,
    pub k_max: usize,
    pub word_length: usize,
    pub saturated: bool,
}

impl FourierExpansion {
    pub fn build(group: &GroupData, rep: &Representation, table: &KloostermanTable, s: Complex64, k_max: usize) -> Result<Self> {
        let (a, b) = (table.cusp_a, table.cusp_b);
        let p_a = fixed_space_projection(group, rep, a)?;
        let eig = cusp_eigendata(group, rep, b)?;
        let phi = phi_constant(table, &p_a, &eig.projections[0], s)?;
        let k = k_max as i64;
        let mut freqs = Vec::new();
        for (j, &nu) in eig.nu.iter().enumerate() {
            for m in -k..=k {
                let f = m as f64 + nu;
                if f != 0.0 {
                    freqs.push((j, f));
                }
            }
        }
        let modes = freqs
            .par_iter()
            .map(|&(j, f)| {
                let c = phi_mode(table, &eig, &p_a, j, f, s)?;
                Ok(FourierMode { j, frequency: f, coefficient: c.value, tail_bound: c.tail_bound })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cusp_a: a,
            cusp_b: b,
            s,
            delta: table.delta,
            p_a,
            phi_ab: phi.value,
            phi_tail_bound: phi.tail_bound,
            modes,
            nu: eig.nu,
            c_max: table.c_max,
            k_max,
            word_length: table.word_length,
            saturated: table.saturated,
        })
    }

    /// `δ y^s P_a + φ y^{1−s}`.
    pub fn constant_term(&self, y: f64) -> CMat {
        let mut m = &self.phi_ab * height_power(y, 1.0 - self.s);
        if self.delta {
            m += &self.p_a * height_power(y, self.s);
        }
        m
    }

    /// The non-constant part `Σ φ_{a,b,j}(f, s) W_s(fz)` and the largest
    /// outermost-mode term.
    fn modes_at(&self, z: &PointH) -> Result<(CMat, f64)> {
        let mut value = zeros(self.p_a.nrows());
        let mut edge = 0.0f64;
        for m in &self.modes {
            if max_abs(&m.coefficient) == 0.0 {
                continue;
            }
            let w = whittaker_freq(self.s, m.frequency, z)?;
            value += &m.coefficient * w;
            if m.frequency.abs() > self.k_max as f64 - 1.0 {
                edge = edge.max(operator_norm(&m.coefficient) * w.norm());
            }
        }
        Ok((value, edge))
    }

    /// `E − δy^sP_a − φy^{1−s}` summed mode by mode, free of the
    /// cancellation in subtracting the constant term from the full value.
    pub fn remainder(&self, z: &PointH) -> Result<CMat> {
        Ok(self.modes_at(z)?.0)
    }

    /// Evaluates the truncated expansion at `z` given in `σ_b`-coordinates.
    pub fn evaluate(&self, z: &PointH) -> Result<FourierValue> {
        let (modes, edge) = self.modes_at(z)?;
        let value = self.constant_term(z.y()) + modes;
        // Omitted modes decay at least geometrically with ratio e^{−2πy}.
        let q = (-std::f64::consts::TAU * z.y()).exp();
        Ok(FourierValue { value, mode_truncation: 2.0 * edge * q / (1.0 - q), saturated: self.saturated })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FourierValue {
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub value: CMat,
    /// Estimate of the omitted modes `|f| > k_max`.
    pub mode_truncation: f64,
    pub saturated: bool,
}

/// Kloosterman tables for every ordered cusp pair, index `a·h + b`.
pub fn kloosterman_tables(group: &GroupData, rep: &Representation, word_length: usize, c_max: f64) -> Result<Vec<KloostermanTable>> {
    crate::group::double_cosets_all(group, word_length, c_max)?
        .iter()
        .map(|dc| KloostermanTable::new(group, rep, dc))
        .collect()
}

/// Convenience wrapper: expansion of `E_a` at cusp `b` and its value at `z`
/// (in `σ_b`-coordinates).
pub fn fourier_evaluate(
    group: &GroupData,
    rep: &Representation,
    params: &EisensteinParams,
    cusp_b: usize,
    z: &PointH,
) -> Result<FourierValue> {
    group.cusp(cusp_b)?;
    let dc = crate::group::double_cosets(group, params.cusp_from, cusp_b, params.word_length, params.c_max)?;
    let table = KloostermanTable::new(group, rep, &dc)?;
    FourierExpansion::build(group, rep, &table, params.s, params.k_max)?.evaluate(z)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatteringMatrix {
    pub s: Complex64,
    pub dim: usize,
    pub cusps: usize,
    /// Block `(a, b)` occupies rows `a·n..` and columns `b·n..`.
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub matrix: CMat,
    pub tail_bounds: Vec<f64>,
    pub saturated: bool,
    pub c_max: f64,
    pub word_length: usize,
}

/// `Φ(s) = (φ_{a,b}(s))_{a,b}`.
pub fn scattering_matrix(group: &GroupData, rep: &Representation, s: Complex64, c_max: f64, word_length: usize) -> Result<ScatteringMatrix> {
    let tables = kloosterman_tables(group, rep, word_length, c_max)?;
    scattering_from_tables(group, rep, &tables, s)
}

pub fn scattering_from_tables(group: &GroupData, rep: &Representation, tables: &[KloostermanTable], s: Complex64) -> Result<ScatteringMatrix> {
    let h = group.cusps().len();
    let n = rep.dim();
    let projections = (0..h).map(|a| fixed_space_projection(group, rep, a)).collect::<Result<Vec<_>>>()?;
    let mut matrix = zeros(n * h);
    let mut tail_bounds = Vec::with_capacity(h * h);
    let mut saturated = true;
    for a in 0..h {
        for b in 0..h {
            let t = &tables[a * h + b];
            let phi = phi_constant(t, &projections[a], &projections[b], s)?;
            matrix.view_mut((a * n, b * n), (n, n)).copy_from(&phi.value);
            tail_bounds.push(phi.tail_bound);
            saturated &= t.saturated;
        }
    }
    Ok(ScatteringMatrix {
        s,
        dim: n,
        cusps: h,
        matrix,
        tail_bounds,
        saturated,
        c_max: tables.first().map_or(0.0, |t| t.c_max),
        word_length: tables.first().map_or(0, |t| t.word_length),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    /// Heights and remainder norms `‖E − δy^sP_a − φy^{1−s}‖` from the expansion.
    pub remainder: Vec<(f64, f64)>,
    /// Fit `remainder ≈ C e^{−βy}`.
    pub fit_constant: f64,
    pub beta: f64,
    pub r_squared: f64,
    /// Heights and `‖E‖/(y^σ + y^{−σ})` from direct summation.
    pub envelope: Vec<(f64, f64)>,
    pub envelope_constant: f64,
}

/// Least-squares line through `(x, ln y)`: returns `(intercept, slope, R²)`.
pub fn fit_exponential(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { 1.0 - ys.iter().zip(&xs).map(|(y, x)| (y - intercept - slope * x).powi(2)).sum::<f64>() / syy } else { 1.0 };
    (intercept, slope, r2)
}

/// Remainder decay along `σ_b(x + iy)` from the Fourier expansion, and the
/// polynomial envelope from the direct sum at `envelope_heights`.
pub fn growth_check(
    group: &GroupData,
    expansion: &FourierExpansion,
    table: &CosetTable,
    x: f64,
    fit_heights: &[f64],
    envelope_heights: &[f64],
) -> Result<GrowthReport> {
    let mut remainder = Vec::new();
    for &y in fit_heights {
        let z = PointH::new(x, y)?;
        remainder.push((y, operator_norm(&expansion.remainder(&z)?)));
    }
    let (intercept, slope, r_squared) = if remainder.iter().all(|p| p.1 > 0.0) && remainder.len() >= 2 {
        fit_exponential(&remainder)
    } else {
        (f64::NEG_INFINITY, 0.0, 1.0)
    };
    let sigma_b = group.cusp(expansion.cusp_b)?.sigma;
    let sig = expansion.s.re;
    let mut envelope = Vec::new();
    for &y in envelope_heights {
        let z = moebius_apply(&sigma_b, &PointH::new(x, y)?);
        let v = eisenstein_direct_with(table, expansion.s, &z);
        envelope.push((y, operator_norm(&v.value) / (y.powf(sig) + y.powf(-sig))));
    }
    Ok(GrowthReport {
        remainder,
        fit_constant: intercept.exp(),
        beta: -slope,
        r_squared,
        envelope_constant: envelope.iter().map(|p| p.1).fold(0.0, f64::max),
        envelope,
    })
}

/// Both sides of the Poisson step for one double coset `ω`:
/// `Σ_k Im(ω(z+k))^s e(−kν)` summed directly for `|k| ≤ k_direct`, and the
/// dual sum `Σ_m e((m+ν)(x + d/c)) c^{−2s} y^s ∫(t²+y²)^{−s} e(−(m+ν)t) dt`
/// for `|m| ≤ m_max`.
pub fn poisson_sides(omega: &GroupElement, z: &PointH, s: Complex64, nu: f64, k_direct: i64, m_max: i64) -> Result<(Complex64, Complex64)> {
    use crate::special::{fourier_integral_mode, fourier_integral_zero};
    let direct: Complex64 = (-k_direct..=k_direct)
        .map(|k| {
            let w = PointH::new(z.x() + k as f64, z.y()).expect("shifted point stays in ℍ");
            height_power(imaginary_of_action(omega, &w), s) * e(-(k as f64) * nu)
        })
        .sum();
    let (c, d) = (omega.c(), omega.d());
    let scale = height_power(z.y(), s) * (-2.0 * s * c.ln()).exp();
    let mut dual = Complex64::new(0.0, 0.0);
    for m in -m_max..=m_max {
        let f = m as f64 + nu;
        let integral = if f == 0.0 { fourier_integral_zero(s, z.y())? } else { fourier_integral_mode(s, f, z.y())? };
        dual += e(f * (z.x() + d / c)) * integral;
    }
    Ok((direct, dual * scale))
}
