//! Shipped groups. Both use the ideal quadrilateral with vertices ∞, −1, 0, 1,
//! which is the Dirichlet domain at `i` for either side pairing.

use std::f64::consts::SQRT_2;

use super::{CuspSpec, GroupData, GroupSpec, Side, Vertex};
use crate::error::{Error, Result};
use crate::hyperbolic::{BoundaryPoint, GroupElement, PointH};

pub const BUILTIN_NAMES: &[&str] = &["gamma2", "square_torus"];

pub fn builtin_group(name: &str) -> Result<GroupData> {
    match name {
        "gamma2" => GroupData::new(gamma2_spec()),
        "square_torus" => GroupData::new(square_torus_spec()),
        other => Err(Error::UnknownGroup(other.to_string())),
    }
}

fn m(a: f64, b: f64, c: f64, d: f64) -> GroupElement {
    GroupElement::new(a, b, c, d).expect("builtin matrices are unimodular")
}

fn quadrilateral(tags: [usize; 4]) -> Vec<Side> {
    let v = [
        Vertex::Ideal(BoundaryPoint::Infinity),
        Vertex::Ideal(BoundaryPoint::Real(-1.0)),
        Vertex::Ideal(BoundaryPoint::Real(0.0)),
        Vertex::Ideal(BoundaryPoint::Real(1.0)),
    ];
    (0..4).map(|k| Side { start: v[k], end: v[(k + 1) % 4], pairing: tags[k] }).collect()
}

fn basepoints() -> (PointH, PointH) {
    (PointH::i(), PointH::new(0.1234, 0.8765).expect("valid point"))
}

/// Γ(2), free on `T² = (1,2;0,1)` and `g = (1,0;2,1)`; generator order
/// `[T², T⁻², g, g⁻¹]`. Cusps ∞, 0, 1 with stabilizers `T²`, `g⁻¹`, `g·T⁻²`.
pub(crate) fn gamma2_spec() -> GroupSpec {
    let r = SQRT_2;
    let (z0, z1) = basepoints();
    GroupSpec {
        name: "gamma2".into(),
        generators: vec![m(1.0, 2.0, 0.0, 1.0), m(1.0, -2.0, 0.0, 1.0), m(1.0, 0.0, 2.0, 1.0), m(1.0, 0.0, -2.0, 1.0)],
        inverse: vec![1, 0, 3, 2],
        // x = −1, |z + ½| = ½, |z − ½| = ½, x = 1.
        sides: quadrilateral([1, 3, 2, 0]),
        z0,
        z1,
        cusps: vec![
            CuspSpec { representative: BoundaryPoint::Infinity, sigma: m(r, 0.0, 0.0, 1.0 / r), stabilizer_word: vec![0] },
            CuspSpec { representative: BoundaryPoint::Real(0.0), sigma: m(0.0, -1.0 / r, r, 0.0), stabilizer_word: vec![3] },
            CuspSpec { representative: BoundaryPoint::Real(1.0), sigma: m(r, -1.0 / r, r, 0.0), stabilizer_word: vec![2, 1] },
        ],
        relations: Vec::new(),
    }
}

/// A once-punctured torus group on the same quadrilateral: the hyperbolic
/// elements `A = (1,1;1,3)/√2` and `B = (3,1;1,1)/√2` pair opposite sides.
/// Generator order `[A, A⁻¹, B, B⁻¹]`; the single cusp ∞ has stabilizer
/// `B·A⁻¹·B⁻¹·A = (1,8;0,1)`.
///
/// Every generator is hyperbolic, so representations that are unitary at the
/// cusp may still be far from unitary.
pub(crate) fn square_torus_spec() -> GroupSpec {
    let s = SQRT_2.recip();
    let w = 8f64.sqrt();
    let (z0, z1) = basepoints();
    GroupSpec {
        name: "square_torus".into(),
        generators: vec![
            m(s, s, s, 3.0 * s),
            m(3.0 * s, -s, -s, s),
            m(3.0 * s, s, s, s),
            m(s, -s, -s, 3.0 * s),
        ],
        inverse: vec![1, 0, 3, 2],
        sides: quadrilateral([1, 3, 0, 2]),
        z0,
        z1,
        cusps: vec![CuspSpec {
            representative: BoundaryPoint::Infinity,
            sigma: m(w, 0.0, 0.0, 1.0 / w),
            stabilizer_word: vec![2, 1, 3, 0],
        }],
        relations: Vec::new(),
    }
}
