//! Run configuration: one TOML document describing the group, the twist,
//! the truncations and a single command. Everything is validated before any
//! computation; errors name the offending field.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{builtin_group, CuspSpec, GroupData, GroupSpec, Side, Vertex, BUILTIN_NAMES};
use crate::hyperbolic::{BoundaryPoint, GroupElement, PointH};
use crate::kernels::{GridSpec, PointPairKernel, SupportBox};
use crate::linalg::{from_pairs, CMat};
use crate::representation::{builtin_representation, Representation, BUILTIN_TWISTS};

pub const DEFAULT_WORD_LENGTH: usize = 8;
pub const DEFAULT_C_MAX: f64 = 50.0;
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_REL_TOL: f64 = 1e-9;

/// Matrices are row-major lists of `[re, im]` pairs.
pub type PairMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for the base-point perturbations of the word tracer.
    #[serde(default)]
    pub seed: u64,
    pub group: GroupConfig,
    #[serde(default)]
    pub representation: RepresentationConfig,
    #[serde(default)]
    pub truncation: Truncation,
    pub output: OutputConfig,
    pub command: Command,
}

/// Either `builtin = "gamma2"` or the explicit fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub builtin: Option<String>,
    pub name: Option<String>,
    /// Rows `[a, b, c, d]`.
    pub generators: Option<Vec<[f64; 4]>>,
    pub inverse: Option<Vec<usize>>,
    pub sides: Option<Vec<SideConfig>>,
    pub z0: Option<[f64; 2]>,
    pub z1: Option<[f64; 2]>,
    pub cusps: Option<Vec<CuspConfig>>,
    #[serde(default)]
    pub relations: Vec<Vec<usize>>,
}

/// `"inf"`, a real number, or a point `[x, y]` with `y > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexConfig {
    Named(String),
    Real(f64),
    Point([f64; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideConfig {
    pub start: VertexConfig,
    pub end: VertexConfig,
    pub pairing: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuspConfig {
    pub representative: VertexConfig,
    pub sigma: [f64; 4],
    pub stabilizer_word: Vec<usize>,
}

/// `builtin = "..."`, or `images` for every generator, or `half` images for
/// one generator of each inverse pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationConfig {
    pub builtin: Option<String>,
    pub dim: Option<usize>,
    pub images: Option<Vec<PairMatrix>>,
    pub half: Option<Vec<HalfImage>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfImage {
    pub generator: usize,
    pub matrix: PairMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    pub word_length: usize,
    pub c_max: f64,
    pub k_max: usize,
    pub rel_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { word_length: DEFAULT_WORD_LENGTH, c_max: DEFAULT_C_MAX, k_max: DEFAULT_K_MAX, rel_tol: DEFAULT_REL_TOL }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMethod {
    Direct,
    Fourier,
    Incomplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelCheck {
    Hs,
    Spectrum,
    Resolvent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialFunction {
    /// `K_{s−½}(2πy)`, the Bessel factor of the Whittaker function.
    KBessel,
    /// `W_s(iy)`.
    Whittaker,
    /// `G_s(u)` with `u` read from the `y` column.
    Green,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventConfig {
    pub s: [f64; 2],
    /// `[x0, x1, y0, y1]` carrying the bump test function.
    pub support: [f64; 4],
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    GroupInfo {
        #[serde(default = "default_ball_length")]
        ball_length: usize,
    },
    Eval {
        method: EvalMethod,
        /// Cusp `a` of `E_a`.
        #[serde(default)]
        cusp: usize,
        /// Points are `σ_b`-coordinates at this cusp.
        #[serde(default)]
        at_cusp: usize,
        points: Vec<[f64; 2]>,
        /// Spectral parameters; unused by the incomplete series.
        #[serde(default)]
        s: Vec<[f64; 2]>,
        /// Support `[A, B]` of the bump profile for the incomplete series.
        support: Option<[f64; 2]>,
    },
    Scattering {
        s: Vec<[f64; 2]>,
    },
    Norms {
        #[serde(default = "default_ball_length")]
        tranche_length: usize,
    },
    Kernel {
        kernel: PointPairKernel,
        checks: Vec<KernelCheck>,
        #[serde(default)]
        grid: GridSpec,
        resolvent: Option<ResolventConfig>,
    },
    Special {
        function: SpecialFunction,
        s: Vec<[f64; 2]>,
        y: Vec<f64>,
    },
}

fn default_ball_length() -> usize {
    4
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GroupInfo { .. } => "group_info",
            Command::Eval { .. } => "eval",
            Command::Scattering { .. } => "scattering",
            Command::Norms { .. } => "norms",
            Command::Kernel { .. } => "kernel",
            Command::Special { .. } => "special",
        }
    }
}

/// Field path of a TOML error: the first back-quoted name in the message,
/// or `config` when the parser does not say.
fn toml_field(e: &toml::de::Error) -> String {
    let msg = e.message();
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "config".into())
}

fn complex(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn point(field: &str, p: [f64; 2]) -> Result<PointH> {
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err(Error::config(field, "coordinates must be finite"));
    }
    PointH::new(p[0], p[1]).map_err(|_| Error::config(field, format!("imaginary part must be positive, got {}", p[1])))
}

fn element(field: &str, r: [f64; 4]) -> Result<GroupElement> {
    GroupElement::new(r[0], r[1], r[2], r[3]).map_err(|e| Error::config(field, e.to_string()))
}

fn boundary(field: &str, v: &VertexConfig) -> Result<BoundaryPoint> {
    match v {
        VertexConfig::Named(s) if s == "inf" => Ok(BoundaryPoint::Infinity),
        VertexConfig::Real(x) if x.is_finite() => Ok(BoundaryPoint::Real(*x)),
        _ => Err(Error::config(field, "expected \"inf\" or a real number")),
    }
}

fn vertex(field: &str, v: &VertexConfig) -> Result<Vertex> {
    match v {
        VertexConfig::Point(p) => Ok(Vertex::Finite(point(field, *p)?)),
        other => Ok(Vertex::Ideal(boundary(field, other)?)),
    }
}

fn matrix(field: &str, m: &PairMatrix, dim: Option<usize>) -> Result<CMat> {
    let out = from_pairs(m).ok_or_else(|| Error::config(field, "matrix must be square and non-empty"))?;
    if let Some(d) = dim {
        if out.nrows() != d {
            return Err(Error::config(field, format!("expected {d}×{d}, got {}×{}", out.nrows(), out.ncols())));
        }
    }
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::config(field, "entries must be finite"));
    }
    Ok(out)
}

impl RunConfig {
    /// Parses and validates. Group and representation data are checked by
    /// building them, so a config accepted here can run.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(toml_field(&e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.truncation;
        if t.word_length == 0 {
            return Err(Error::config("truncation.word_length", "must be positive"));
        }
        if !(t.c_max.is_finite() && t.c_max > 0.0) {
            return Err(Error::config("truncation.c_max", "must be positive"));
        }
        if !(t.rel_tol > 0.0 && t.rel_tol < 1.0) {
            return Err(Error::config("truncation.rel_tol", "must lie in (0, 1)"));
        }
        if self.output.path.as_os_str().is_empty() {
            return Err(Error::config("output.path", "must not be empty"));
        }
        if self.output.format == OutputFormat::Csv && matches!(self.command, Command::GroupInfo { .. } | Command::Kernel { .. }) {
            return Err(Error::config("output.format", format!("`{}` only writes json", self.command.name())));
        }
        let group = self.build_group()?;
        self.build_representation(&group)?;
        self.validate_command(&group)
    }

    fn validate_command(&self, group: &GroupData) -> Result<()> {
        let h = group.cusps().len();
        let cusp_index = |field: &str, a: usize| {
            if a < h {
                Ok(())
            } else {
                Err(Error::config(field, format!("cusp {a} out of range (group has {h})")))
            }
        };
        let s_values = |field: &str, s: &[[f64; 2]]| -> Result<()> {
            if s.is_empty() {
                return Err(Error::config(field, "needs at least one value"));
            }
            for (i, p) in s.iter().enumerate() {
                if !(p[0].is_finite() && p[1].is_finite()) {
                    return Err(Error::config(format!("{field}[{i}]"), "must be finite"));
                }
            }
            Ok(())
        };
        match &self.command {
            Command::GroupInfo { ball_length } => {
                if *ball_length == 0 || *ball_length > 12 {
                    return Err(Error::config("command.ball_length", "must lie in 1..=12"));
                }
            }
            Command::Eval { method, cusp, at_cusp, points, s, support } => {
                cusp_index("command.cusp", *cusp)?;
                cusp_index("command.at_cusp", *at_cusp)?;
                if points.is_empty() {
                    return Err(Error::config("command.points", "needs at least one point"));
                }
                for (i, p) in points.iter().enumerate() {
                    point(&format!("command.points[{i}]"), *p)?;
                }
                if *method == EvalMethod::Incomplete {
                    if !s.is_empty() {
                        return Err(Error::config("command.s", "not used by the incomplete series"));
                    }
                } else {
                    s_values("command.s", s)?;
                    for (i, p) in s.iter().enumerate() {
                        if p[0] <= 1.0 {
                            return Err(Error::config(format!("command.s[{i}]"), "series needs Re s > 1"));
                        }
                    }
                }
                match (method, support) {
                    (EvalMethod::Incomplete, None) => {
                        return Err(Error::config("command.support", "required for the incomplete series"))
                    }
                    (EvalMethod::Incomplete, Some([lo, hi])) if !(*lo > 0.0 && hi > lo && hi.is_finite()) => {
                        return Err(Error::config("command.support", "needs 0 < A < B"))
                    }
                    (EvalMethod::Direct | EvalMethod::Fourier, Some(_)) => {
                        return Err(Error::config("command.support", "only used by the incomplete series"))
                    }
                    _ => {}
                }
            }
            Command::Scattering { s } => {
                s_values("command.s", s)?;
                for (i, p) in s.iter().enumerate() {
                    if p[0] <= 1.0 {
                        return Err(Error::config(format!("command.s[{i}]"), "series needs Re s > 1"));
                    }
                }
            }
            Command::Norms { tranche_length } => {
                if *tranche_length == 0 || *tranche_length > 10 {
                    return Err(Error::config("command.tranche_length", "must lie in 1..=10"));
                }
            }
            Command::Kernel { kernel, checks, grid, resolvent } => {
                kernel.validate().map_err(|e| Error::config("command.kernel", e.to_string()))?;
                if checks.is_empty() {
                    return Err(Error::config("command.checks", "needs at least one check"));
                }
                if !(grid.y_cut > 0.0 && grid.y_max > grid.y_cut && grid.y_max.is_finite()) {
                    return Err(Error::config("command.grid", "needs 0 < y_cut < y_max"));
                }
                if grid.nx == 0 || grid.ny == 0 || grid.strip_nx == 0 || grid.strip_ny == 0 {
                    return Err(Error::config("command.grid", "cell counts must be positive"));
                }
                match (checks.contains(&KernelCheck::Resolvent), resolvent) {
                    (true, None) => return Err(Error::config("command.resolvent", "required by the resolvent check")),
                    (_, Some(r)) => {
                        if !(r.s[0] > 0.5 && r.s[1].is_finite()) {
                            return Err(Error::config("command.resolvent.s", "needs Re s > 1/2"));
                        }
                        r.support_box().validate().map_err(|e| Error::config("command.resolvent.support", e.to_string()))?;
                        if r.points.is_empty() {
                            return Err(Error::config("command.resolvent.points", "needs at least one point"));
                        }
                        for (i, p) in r.points.iter().enumerate() {
                            point(&format!("command.resolvent.points[{i}]"), *p)?;
                        }
                    }
                    _ => {}
                }
            }
            Command::Special { function, s, y } => {
                s_values("command.s", s)?;
                if y.is_empty() {
                    return Err(Error::config("command.y", "needs at least one value"));
                }
                for (i, v) in y.iter().enumerate() {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(Error::config(format!("command.y[{i}]"), "must be positive and finite"));
                    }
                }
                if *function == SpecialFunction::Green {
                    for (i, p) in s.iter().enumerate() {
                        if p[0] <= 0.0 {
                            return Err(Error::config(format!("command.s[{i}]"), "Green function needs Re s > 0"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build_group(&self) -> Result<GroupData> {
        let g = &self.group;
        if let Some(name) = &g.builtin {
            let explicit = g.name.is_some()
                || g.generators.is_some()
                || g.inverse.is_some()
                || g.sides.is_some()
                || g.z0.is_some()
                || g.z1.is_some()
                || g.cusps.is_some()
                || !g.relations.is_empty();
            if explicit {
                return Err(Error::config("group", "give either `builtin` or explicit data, not both"));
            }
            return builtin_group(name).map_err(|_| {
                Error::config("group.builtin", format!("unknown group `{name}`; known: {}", BUILTIN_NAMES.join(", ")))
            });
        }
        let need = |field: &str| Error::config(format!("group.{field}"), "required for an explicit group");
        let generators = g
            .generators
            .as_ref()
            .ok_or_else(|| need("generators"))?
            .iter()
            .enumerate()
            .map(|(i, r)| element(&format!("group.generators[{i}]"), *r))
            .collect::<Result<Vec<_>>>()?;
        let n = generators.len();
        let inverse = g.inverse.clone().ok_or_else(|| need("inverse"))?;
        if inverse.len() != n {
            return Err(Error::config("group.inverse", format!("expected {n} entries, got {}", inverse.len())));
        }
        let index = |field: String, i: usize| {
            if i < n {
                Ok(i)
            } else {
                Err(Error::config(field, format!("generator index {i} out of range (have {n})")))
            }
        };
        for (i, &j) in inverse.iter().enumerate() {
            index(format!("group.inverse[{i}]"), j)?;
        }
        let sides = g
            .sides
            .as_ref()
            .ok_or_else(|| need("sides"))?
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let f = format!("group.sides[{i}]");
                Ok(Side {
                    start: vertex(&format!("{f}.start"), &s.start)?,
                    end: vertex(&format!("{f}.end"), &s.end)?,
                    pairing: index(format!("{f}.pairing"), s.pairing)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cusps = g
            .cusps
            .as_ref()
            .ok_or_else(|| need("cusps"))?
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let f = format!("group.cusps[{i}]");
                for (k, &l) in c.stabilizer_word.iter().enumerate() {
                    index(format!("{f}.stabilizer_word[{k}]"), l)?;
                }
                Ok(CuspSpec {
                    representative: boundary(&format!("{f}.representative"), &c.representative)?,
                    sigma: element(&format!("{f}.sigma"), c.sigma)?,
                    stabilizer_word: c.stabilizer_word.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, r) in g.relations.iter().enumerate() {
            for (k, &l) in r.iter().enumerate() {
                index(format!("group.relations[{i}][{k}]"), l)?;
            }
        }
        let spec = GroupSpec {
            name: g.name.clone().unwrap_or_else(|| "explicit".into()),
            generators,
            inverse,
            sides,
            z0: point("group.z0", g.z0.ok_or_else(|| need("z0"))?)?,
            z1: point("group.z1", g.z1.ok_or_else(|| need("z1"))?)?,
            cusps,
            relations: g.relations.clone(),
        };
        GroupData::new(spec).map_err(|e| Error::config("group", e.to_string()))
    }

    pub fn build_representation(&self, group: &GroupData) -> Result<Representation> {
        let r = &self.representation;
        let rep = match (&r.builtin, &r.images, &r.half) {
            (None, None, None) => return Ok(Representation::trivial(group)),
            (Some(name), None, None) => {
                if r.dim.is_some() {
                    return Err(Error::config("representation.dim", "not used with a builtin twist"));
                }
                builtin_representation(group, name).map_err(|e| {
                    Error::config("representation.builtin", format!("{e}; known: {}", BUILTIN_TWISTS.join(", ")))
                })?
            }
            (None, Some(images), None) => {
                let dim = r.dim.ok_or_else(|| Error::config("representation.dim", "required with explicit images"))?;
                let mats = images
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix(&format!("representation.images[{i}]"), m, Some(dim)))
                    .collect::<Result<Vec<_>>>()?;
                Representation::new(group, mats).map_err(|e| Error::config("representation.images", e.to_string()))?
            }
            (None, None, Some(half)) => {
                let dim = r.dim.ok_or_else(|| Error::config("representation.dim", "required with explicit images"))?;
                let given = half
                    .iter()
                    .enumerate()
                    .map(|(i, h)| Ok((h.generator, matrix(&format!("representation.half[{i}].matrix"), &h.matrix, Some(dim))?)))
                    .collect::<Result<Vec<_>>>()?;
                Representation::from_half(group, given).map_err(|e| Error::config("representation.half", e.to_string()))?
            }
            _ => return Err(Error::config("representation", "give exactly one of `builtin`, `images`, `half`")),
        };
        Ok(rep)
    }
}

impl ResolventConfig {
    pub fn support_box(&self) -> SupportBox {
        let [x0, x1, y0, y1] = self.support;
        SupportBox { x0, x1, y0, y1 }
    }

    pub fn s_complex(&self) -> Complex64 {
        complex(self.s)
    }
}

/// `[re, im]` pairs as complex numbers.
pub fn complex_list(s: &[[f64; 2]]) -> Vec<Complex64> {
    s.iter().copied().map(complex).collect()
}
