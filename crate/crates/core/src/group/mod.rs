//! Fuchsian groups given by a Dirichlet fundamental domain with side
//! pairings, plus the word and coset machinery built on top of it.

mod builtin;
mod cosets;
pub mod keys;
mod trace;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{
    imaginary_of_action, moebius_apply, moebius_boundary, point_pair_invariant, BoundaryPoint, GroupElement,
    PointH, ELEMENT_TOL,
};

pub use builtin::{builtin_group, BUILTIN_NAMES};
pub(crate) use cosets::same_modulus;
pub use cosets::{
    coset_normalization_constant, coset_representatives, double_cosets, double_cosets_all, CosetRep,
    DoubleCosetData, DoubleCosetEntry,
};
pub use trace::{
    normal_presentation, trace_normal_presentation, tranche_bound_check, tranche_decompose, tranches_from_tags,
    NormalTrace, TrancheClass, TrancheReport, TrancheRow, Tranches,
};

/// A reduced word in the generators, as a sequence of generator indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Wraps letters already known to be valid and reduced.
    pub(crate) fn from_reduced(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "]")
    }
}

/// Endpoint of a side: an ideal vertex on ∂ℍ or a finite vertex in ℍ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Vertex {
    Ideal(BoundaryPoint),
    Finite(PointH),
}

impl Vertex {
    fn approx_eq(&self, other: &Vertex) -> bool {
        match (self, other) {
            (Vertex::Ideal(p), Vertex::Ideal(q)) => p.approx_eq(q, 1e-9),
            (Vertex::Finite(p), Vertex::Finite(q)) => point_pair_invariant(p, q) < 1e-16,
            _ => false,
        }
    }

    fn image(&self, g: &GroupElement) -> Vertex {
        match self {
            Vertex::Ideal(p) => Vertex::Ideal(moebius_boundary(g, p)),
            Vertex::Finite(z) => Vertex::Finite(moebius_apply(g, z)),
        }
    }

    /// Cayley image in the disk centred at `z0`; ideal vertices land on the
    /// unit circle and ∞ lands on 1.
    fn to_disk(&self, z0: &PointH) -> Complex64 {
        let c = z0.to_complex();
        let w = match self {
            Vertex::Ideal(BoundaryPoint::Infinity) => return Complex64::new(1.0, 0.0),
            Vertex::Ideal(BoundaryPoint::Real(x)) => Complex64::new(*x, 0.0),
            Vertex::Finite(z) => z.to_complex(),
        };
        (w - c) / (w - c.conj())
    }
}

/// A side of the fundamental domain, listed counter-clockwise. Across the
/// side lies `γF` where `γ = generators[pairing]`; the partner side is the
/// one tagged with `γ⁻¹`, and `γ` carries the partner onto this side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Side {
    pub start: Vertex,
    pub end: Vertex,
    pub pairing: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CuspData {
    pub representative: BoundaryPoint,
    pub sigma: GroupElement,
    pub stabilizer_generator: GroupElement,
    pub stabilizer_word: Word,
}

/// User-facing description of a cusp; [`GroupData::new`] derives the
/// stabilizer element from the word and validates everything.
#[derive(Clone, Debug, PartialEq)]
pub struct CuspSpec {
    pub representative: BoundaryPoint,
    pub sigma: GroupElement,
    pub stabilizer_word: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub generators: Vec<GroupElement>,
    pub inverse: Vec<usize>,
    pub sides: Vec<Side>,
    pub z0: PointH,
    pub z1: PointH,
    pub cusps: Vec<CuspSpec>,
    pub relations: Vec<Vec<usize>>,
}

/// A validated group. Immutable after construction.
#[derive(Clone, Debug)]
pub struct GroupData {
    name: String,
    generators: Vec<GroupElement>,
    inverse: Vec<usize>,
    sides: Vec<Side>,
    z0: PointH,
    z1: PointH,
    cusps: Vec<CuspData>,
    /// Per generator: the cusp whose class contains its fixed point, if parabolic.
    parabolic_class: Vec<Option<usize>>,
    relations: Vec<Word>,
    /// `γ_k z₀` for each generator.
    neighbour_centres: Vec<PointH>,
}

/// Ball radius used to identify cusp classes of parabolic fixed points.
const CLASS_SEARCH_LENGTH: usize = 4;

impl GroupData {
    pub fn new(spec: GroupSpec) -> Result<Self> {
        let GroupSpec { name, generators, inverse, sides, z0, z1, cusps, relations } = spec;
        let n = generators.len();
        if n == 0 {
            return Err(Error::GroupData("no generators".into()));
        }
        if inverse.len() != n {
            return Err(Error::GroupData(format!("inverse map has {} entries for {n} generators", inverse.len())));
        }
        for (i, &j) in inverse.iter().enumerate() {
            if j >= n {
                return Err(Error::InvalidIndex { index: j, count: n });
            }
            if inverse[j] != i || j == i {
                return Err(Error::GroupData(format!("inverse map is not a fixed-point-free involution at {i}")));
            }
            if !generators[i].mul(&generators[j]).approx_eq(&GroupElement::IDENTITY, 1e-10) {
                return Err(Error::GroupData(format!("generator {j} is not the inverse of generator {i}")));
            }
        }
        let neighbour_centres: Vec<PointH> = generators.iter().map(|g| moebius_apply(g, &z0)).collect();
        let mut group = GroupData {
            name,
            generators,
            inverse,
            sides,
            z0,
            z1,
            cusps: Vec::new(),
            parabolic_class: vec![None; n],
            relations: Vec::new(),
            neighbour_centres,
        };
        group.validate_sides()?;
        group.validate_basepoints()?;
        for r in relations {
            let w = group.word(r)?;
            if !group.word_evaluate(&w)?.approx_eq(&GroupElement::IDENTITY, 1e-8) {
                return Err(Error::GroupData(format!("relation {w} does not evaluate to the identity")));
            }
            group.relations.push(w);
        }
        if cusps.is_empty() {
            return Err(Error::GroupData("at least one cusp is required".into()));
        }
        for (k, c) in cusps.into_iter().enumerate() {
            let word = group.word(c.stabilizer_word)?;
            let gamma = group.word_evaluate(&word)?;
            let image = moebius_boundary(&c.sigma, &BoundaryPoint::Infinity);
            if !image.approx_eq(&c.representative, 1e-9) {
                return Err(Error::GroupData(format!("cusp {k}: σ∞ = {image}, expected {}", c.representative)));
            }
            let conj = c.sigma.inverse().mul(&gamma).mul(&c.sigma);
            if !conj.approx_eq(&GroupElement::translation(1.0), ELEMENT_TOL) {
                return Err(Error::GroupData(format!("cusp {k}: σ⁻¹γσ = {conj}, expected (1, 1; 0, 1)")));
            }
            group.cusps.push(CuspData {
                representative: c.representative,
                sigma: c.sigma,
                stabilizer_generator: gamma,
                stabilizer_word: word,
            });
        }
        group.classify_parabolics()?;
        Ok(group)
    }

    fn validate_sides(&self) -> Result<()> {
        let m = self.sides.len();
        if m < 3 {
            return Err(Error::GroupData(format!("fundamental domain needs at least 3 sides, got {m}")));
        }
        for (k, side) in self.sides.iter().enumerate() {
            let n = self.generators.len();
            if side.pairing >= n {
                return Err(Error::InvalidIndex { index: side.pairing, count: n });
            }
            let next = &self.sides[(k + 1) % m];
            if !side.end.approx_eq(&next.start) {
                return Err(Error::GroupData(format!("side {k} does not end where side {} starts", (k + 1) % m)));
            }
            let partner_tag = self.inverse[side.pairing];
            let partners: Vec<&Side> = self.sides.iter().filter(|s| s.pairing == partner_tag).collect();
            if partners.len() != 1 {
                return Err(Error::GroupData(format!("side {k} has {} partner sides", partners.len())));
            }
            let partner = partners[0];
            let g = &self.generators[side.pairing];
            if !partner.start.image(g).approx_eq(&side.end) || !partner.end.image(g).approx_eq(&side.start) {
                return Err(Error::GroupData(format!("generator {} does not carry its partner side onto side {k}", side.pairing)));
            }
            // The domain must be the Dirichlet domain at z0: each side lies on
            // the bisector between z0 and its neighbour's centre.
            let centre = moebius_apply(g, &self.z0);
            for v in [side.start, side.end] {
                if !on_bisector(&v, &self.z0, &centre) {
                    return Err(Error::GroupData(format!("side {k} is not on the bisector of z0 and generator {}·z0", side.pairing)));
                }
            }
        }
        Ok(())
    }

    fn validate_basepoints(&self) -> Result<()> {
        // The chord polygon in the disk centred at z0 lies inside the
        // geodesic polygon, so winding around 0 is a sufficient test.
        let pts: Vec<Complex64> = self.sides.iter().map(|s| s.start.to_disk(&self.z0)).collect();
        let mut winding = 0.0;
        for k in 0..pts.len() {
            let a = pts[k];
            let b = pts[(k + 1) % pts.len()];
            winding += (b / a).arg();
        }
        if (winding - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
            return Err(Error::GroupData("z0 is not enclosed counter-clockwise by the sides".into()));
        }
        if point_pair_invariant(&self.z0, &self.z1) < 1e-12 {
            return Err(Error::GroupData("z1 must differ from z0".into()));
        }
        if !self.strictly_inside(&self.z1) {
            return Err(Error::GroupData("z1 is not in the interior of the fundamental domain".into()));
        }
        Ok(())
    }

    fn classify_parabolics(&mut self) -> Result<()> {
        let ball = enumerate_ball(self, CLASS_SEARCH_LENGTH);
        for (i, g) in self.generators.iter().enumerate() {
            if (g.trace().abs() - 2.0).abs() > 1e-9 {
                continue;
            }
            let p = g.parabolic_fixed_point();
            let class = self.cusps.iter().position(|c| {
                ball.iter().any(|(_, h)| moebius_boundary(h, &p).approx_eq(&c.representative, 1e-9))
            });
            match class {
                Some(a) => self.parabolic_class[i] = Some(a),
                None => {
                    return Err(Error::GroupData(format!("parabolic generator {i} fixes {p}, which is not equivalent to a listed cusp")))
                }
            }
        }
        for (a, c) in self.cusps.iter().enumerate() {
            for (b, d) in self.cusps.iter().enumerate().skip(a + 1) {
                if ball.iter().any(|(_, h)| moebius_boundary(h, &c.representative).approx_eq(&d.representative, 1e-9)) {
                    return Err(Error::GroupData(format!("cusps {a} and {b} are Γ-equivalent")));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }
    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }
    pub fn inverse_index(&self, i: usize) -> usize {
        self.inverse[i]
    }
    pub fn inverse_map(&self) -> &[usize] {
        &self.inverse
    }
    pub fn sides(&self) -> &[Side] {
        &self.sides
    }
    pub fn z0(&self) -> PointH {
        self.z0
    }
    pub fn z1(&self) -> PointH {
        self.z1
    }
    pub fn cusps(&self) -> &[CuspData] {
        &self.cusps
    }
    pub fn cusp(&self, a: usize) -> Result<&CuspData> {
        self.cusps.get(a).ok_or_else(|| Error::Domain(format!("cusp index {a} out of range ({} cusps)", self.cusps.len())))
    }
    pub fn relations(&self) -> &[Word] {
        &self.relations
    }

    /// Cusp class of each generator, `None` for non-parabolic generators.
    pub fn parabolic_classes(&self) -> &[Option<usize>] {
        &self.parabolic_class
    }

    /// Validates indices and reducedness.
    pub fn word(&self, letters: Vec<usize>) -> Result<Word> {
        let n = self.generators.len();
        for (k, &l) in letters.iter().enumerate() {
            if l >= n {
                return Err(Error::InvalidIndex { index: l, count: n });
            }
            if k > 0 && self.inverse[letters[k - 1]] == l {
                return Err(Error::NotReduced(k));
            }
        }
        Ok(Word(letters))
    }

    /// Freely reduces an arbitrary letter sequence (indices assumed valid).
    pub fn free_reduce(&self, letters: impl IntoIterator<Item = usize>) -> Word {
        let mut out: Vec<usize> = Vec::new();
        for l in letters {
            if out.last().is_some_and(|&p| self.inverse[p] == l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn inverse_word(&self, w: &Word) -> Word {
        Word(w.0.iter().rev().map(|&l| self.inverse[l]).collect())
    }

    /// `w^k` for integer `k`, freely reduced.
    pub fn word_power(&self, w: &Word, k: i64) -> Word {
        let base = if k < 0 { self.inverse_word(w) } else { w.clone() };
        let reps = k.unsigned_abs() as usize;
        self.free_reduce(std::iter::repeat(base.0.iter().copied()).take(reps).flatten())
    }

    pub fn word_evaluate(&self, w: &Word) -> Result<GroupElement> {
        let n = self.generators.len();
        let mut g = GroupElement::IDENTITY;
        for &l in &w.0 {
            let h = self.generators.get(l).ok_or(Error::InvalidIndex { index: l, count: n })?;
            g = g.mul(h);
        }
        Ok(g)
    }

    /// Closed-domain membership: `u(z, z₀) ≤ u(z, γ_k z₀)` for every side.
    pub fn in_closure(&self, z: &PointH) -> bool {
        let u0 = point_pair_invariant(z, &self.z0);
        self.sides.iter().all(|s| u0 <= point_pair_invariant(z, &self.neighbour_centres[s.pairing]) * (1.0 + 1e-12))
    }

    fn strictly_inside(&self, z: &PointH) -> bool {
        let u0 = point_pair_invariant(z, &self.z0);
        self.sides.iter().all(|s| u0 < point_pair_invariant(z, &self.neighbour_centres[s.pairing]) * (1.0 - 1e-12))
    }

    pub(crate) fn neighbour_centre(&self, k: usize) -> &PointH {
        &self.neighbour_centres[k]
    }

    /// Generators tagging sides, i.e. the ones whose translates of F are
    /// adjacent to F.
    pub(crate) fn side_generators(&self) -> impl Iterator<Item = usize> + '_ {
        self.sides.iter().map(|s| s.pairing)
    }
}

fn on_bisector(v: &Vertex, z0: &PointH, z1: &PointH) -> bool {
    match v {
        Vertex::Finite(p) => {
            let a = point_pair_invariant(p, z0);
            let b = point_pair_invariant(p, z1);
            (a - b).abs() <= 1e-9 * (1.0 + a.max(b))
        }
        // Limit of u(p, z0)/u(p, z1) along the approach to the boundary point.
        Vertex::Ideal(BoundaryPoint::Infinity) => (z0.y() - z1.y()).abs() <= 1e-9 * z0.y().max(z1.y()),
        Vertex::Ideal(BoundaryPoint::Real(x)) => {
            let a = ((x - z0.x()).powi(2) + z0.y().powi(2)) / z0.y();
            let b = ((x - z1.x()).powi(2) + z1.y().powi(2)) / z1.y();
            (a - b).abs() <= 1e-9 * (1.0 + a.max(b))
        }
    }
}

/// Depth-first walk over all reduced words of length ≤ `max_len`, visiting
/// the empty word first and children in increasing letter order.
pub fn visit_ball<F>(group: &GroupData, max_len: usize, mut visit: F)
where
    F: FnMut(&[usize], &GroupElement),
{
    let mut letters = Vec::with_capacity(max_len);
    visit(&letters, &GroupElement::IDENTITY);
    walk(group, max_len, &mut letters, &GroupElement::IDENTITY, &mut visit);
}

/// Like [`visit_ball`] but restricted to words starting with `first`.
pub(crate) fn visit_subtree<F>(group: &GroupData, max_len: usize, first: usize, mut visit: F)
where
    F: FnMut(&[usize], &GroupElement),
{
    if max_len == 0 {
        return;
    }
    let mut letters = vec![first];
    let g = group.generators[first];
    visit(&letters, &g);
    walk(group, max_len, &mut letters, &g, &mut visit);
}

fn walk<F>(group: &GroupData, max_len: usize, letters: &mut Vec<usize>, g: &GroupElement, visit: &mut F)
where
    F: FnMut(&[usize], &GroupElement),
{
    if letters.len() == max_len {
        return;
    }
    let last = letters.last().map(|&l| group.inverse[l]);
    for l in 0..group.generators.len() {
        if Some(l) == last {
            continue;
        }
        let h = g.mul(&group.generators[l]);
        letters.push(l);
        visit(letters, &h);
        walk(group, max_len, letters, &h, visit);
        letters.pop();
    }
}

/// All reduced words of length ≤ `max_len`, sorted by (length, letters),
/// deduplicated by element (only relevant for groups with relations).
pub fn enumerate_ball(group: &GroupData, max_len: usize) -> Vec<(Word, GroupElement)> {
    let mut out: Vec<(Word, GroupElement)> = Vec::new();
    visit_ball(group, max_len, |w, g| out.push((Word(w.to_vec()), *g)));
    out.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    if group.relations.is_empty() {
        return out;
    }
    let mut index = keys::ApproxIndex::<4>::new();
    out.into_iter().filter(|(_, g)| index.find_or_insert(g.entries()).1).collect()
}

/// Greedy descent into the closed fundamental domain. Returns `(z', w)` with
/// `z' = word_evaluate(w)·z`.
pub fn reduce_to_domain(group: &GroupData, z: &PointH) -> Result<(PointH, Word)> {
    const CAP: usize = 1_000_000;
    let mut cur = *z;
    // Applied letters, leftmost = most recent.
    let mut applied: Vec<usize> = Vec::new();
    for _ in 0..CAP {
        let u0 = point_pair_invariant(&cur, &group.z0);
        let mut best: Option<(usize, f64)> = None;
        for k in group.side_generators() {
            let u = point_pair_invariant(&cur, &group.neighbour_centres[k]);
            if u < u0 * (1.0 - 1e-13) && best.map_or(true, |(_, b)| u < b) {
                best = Some((k, u));
            }
        }
        let Some((k, _)) = best else {
            applied.reverse();
            return Ok((cur, group.free_reduce(applied)));
        };
        let inv = group.inverse[k];
        cur = moebius_apply(&group.generators[inv], &cur);
        applied.push(inv);
    }
    Err(Error::GroupData(format!("reduction of {z} did not terminate")))
}

/// `y_Γ(z)` over the ball of radius `max_len`.
pub fn invariant_height(group: &GroupData, z: &PointH, max_len: usize) -> f64 {
    invariant_height_in(group, &enumerate_ball(group, max_len), z)
}

/// `y_Γ(z)` over a precomputed ball.
pub fn invariant_height_in(group: &GroupData, ball: &[(Word, GroupElement)], z: &PointH) -> f64 {
    let mut best = 0.0f64;
    for cusp in &group.cusps {
        let si = cusp.sigma.inverse();
        for (_, g) in ball {
            best = best.max(imaginary_of_action(&si.mul(g), z));
        }
    }
    best
}
