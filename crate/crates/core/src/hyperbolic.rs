//! Points of the upper half-plane, its boundary, and PSL₂(ℝ).

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries below this fraction of the largest entry count as zero when
/// choosing the canonical sign.
const SIGN_EPS: f64 = 1e-14;

/// Tolerance for entrywise equality of canonical representatives.
pub const ELEMENT_TOL: f64 = 1e-9;

/// A point `x + iy` with `y > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointH {
    x: f64,
    y: f64,
}

impl PointH {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Domain(format!("point ({x}, {y}) is not finite")));
        }
        if y <= 0.0 {
            return Err(Error::Domain(format!("point ({x}, {y}) is not in the upper half-plane")));
        }
        Ok(Self { x, y })
    }

    /// Internal constructor for values produced by the group action, which
    /// keeps `y > 0` by construction.
    pub(crate) fn raw(x: f64, y: f64) -> Self {
        debug_assert!(y > 0.0, "raw point with y = {y}");
        Self { x, y }
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    /// `i`, the usual base point.
    pub fn i() -> Self {
        Self { x: 0.0, y: 1.0 }
    }
}

impl fmt::Display for PointH {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.x, self.y)
    }
}

/// A point of ℝ ∪ {∞}. `Infinity` is a tag, never an IEEE infinity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Real(f64),
    Infinity,
}

impl BoundaryPoint {
    pub fn is_infinity(&self) -> bool {
        matches!(self, BoundaryPoint::Infinity)
    }

    /// Equality with a tolerance on the real coordinate.
    pub fn approx_eq(&self, other: &BoundaryPoint, tol: f64) -> bool {
        match (self, other) {
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => true,
            (BoundaryPoint::Real(a), BoundaryPoint::Real(b)) => (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
            _ => false,
        }
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPoint::Real(x) => write!(f, "{x}"),
            BoundaryPoint::Infinity => write!(f, "∞"),
        }
    }
}

/// An element of PSL₂(ℝ), stored as the representative whose first nonzero
/// entry among (c, a) is positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElement {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Builds an element from a matrix with positive determinant, rescaling
    /// it to determinant one. Matrices whose determinant is off by more than
    /// `1e-6` are rejected so that typos in configs do not get normalized away.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        let det = a * d - b * c;
        if (det - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!("matrix ({a}, {b}; {c}, {d}) has determinant {det}, expected 1")));
        }
        Ok(Self::normalized(a, b, c, d))
    }

    /// Rescales by `1/√det` and fixes the sign. Caller guarantees `det > 0`.
    pub(crate) fn normalized(a: f64, b: f64, c: f64, d: f64) -> Self {
        let det = a * d - b * c;
        let (a, b, c, d) = if det != 1.0 {
            let k = det.sqrt().recip();
            (a * k, b * k, c * k, d * k)
        } else {
            (a, b, c, d)
        };
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
        let flip = if c.abs() > SIGN_EPS * scale { c < 0.0 } else { a < 0.0 };
        if flip {
            Self { a: -a, b: -b, c: -c, d: -d }
        } else {
            Self { a, b, c, d }
        }
    }

    pub fn translation(t: f64) -> Self {
        Self { a: 1.0, b: t, c: 0.0, d: 1.0 }
    }

    pub fn diagonal(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda != 0.0) {
            return Err(Error::Domain("diagonal entry must be finite and nonzero".into()));
        }
        Ok(Self::normalized(lambda, 0.0, 0.0, lambda.recip()))
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        Self::normalized(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn inverse(&self) -> GroupElement {
        Self::normalized(self.d, -self.b, -self.c, self.a)
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn is_parabolic(&self, tol: f64) -> bool {
        (self.trace().abs() - 2.0).abs() <= tol && !self.approx_eq(&Self::IDENTITY, tol)
    }

    /// Entrywise comparison up to the sign of the matrix: canonical
    /// representatives flip sign when rounding moves `c` across zero.
    pub fn approx_eq(&self, o: &GroupElement, tol: f64) -> bool {
        let close = |sign: f64| {
            self.entries()
                .iter()
                .zip(o.entries().iter())
                .all(|(p, q)| (p - sign * q).abs() <= tol * (1.0 + p.abs().max(q.abs())))
        };
        close(1.0) || close(-1.0)
    }

    /// Fixed boundary point of a parabolic element.
    pub fn parabolic_fixed_point(&self) -> BoundaryPoint {
        let scale = self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs());
        if self.c.abs() <= SIGN_EPS * scale {
            BoundaryPoint::Infinity
        } else {
            BoundaryPoint::Real((self.a - self.d) / (2.0 * self.c))
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}; {}, {})", self.a, self.b, self.c, self.d)
    }
}

/// `gz = (az+b)/(cz+d)`.
pub fn moebius_apply(g: &GroupElement, z: &PointH) -> PointH {
    let (a, b, c, d) = (g.a, g.b, g.c, g.d);
    let dr = c * z.x + d;
    let di = c * z.y;
    let den = dr * dr + di * di;
    let nr = a * z.x + b;
    let ni = a * z.y;
    let x = (nr * dr + ni * di) / den;
    PointH::raw(x, z.y / den)
}

/// Boundary action, with `g∞ = a/c` and the pole `−d/c ↦ ∞`.
pub fn moebius_boundary(g: &GroupElement, p: &BoundaryPoint) -> BoundaryPoint {
    let (a, b, c, d) = (g.a, g.b, g.c, g.d);
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    match *p {
        BoundaryPoint::Infinity => {
            if c.abs() <= SIGN_EPS * scale {
                BoundaryPoint::Infinity
            } else {
                BoundaryPoint::Real(a / c)
            }
        }
        BoundaryPoint::Real(x) => {
            let den = c * x + d;
            if den.abs() <= 1e-13 * ((c * x).abs() + d.abs()) {
                BoundaryPoint::Infinity
            } else {
                BoundaryPoint::Real((a * x + b) / den)
            }
        }
    }
}

/// `u(z,w) = |z−w|² / (Im z · Im w)`.
pub fn point_pair_invariant(z: &PointH, w: &PointH) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    (dx * dx + dy * dy) / (z.y * w.y)
}

/// Hyperbolic distance, from `cosh d = 1 + u/2` in the cancellation-free form
/// `d = 2 asinh(√u / 2)`.
pub fn hyperbolic_distance(z: &PointH, w: &PointH) -> f64 {
    2.0 * (0.5 * point_pair_invariant(z, w).sqrt()).asinh()
}

/// `μ(g) = a² + b² + c² + d²`.
pub fn frobenius_mu(g: &GroupElement) -> f64 {
    g.a * g.a + g.b * g.b + g.c * g.c + g.d * g.d
}

/// `Im(gz) = y / |cz + d|²`.
pub fn imaginary_of_action(g: &GroupElement, z: &PointH) -> f64 {
    let dr = g.c * z.x + g.d;
    let di = g.c * z.y;
    z.y / (dr * dr + di * di)
}

/// The element `(√y, x/√y; 0, 1/√y)` carrying `i` to `z`.
pub fn lift_to_i(z: &PointH) -> GroupElement {
    let r = z.y.sqrt();
    GroupElement::normalized(r, z.x / r, 0.0, 1.0 / r)
}

fn disk_to_half_plane(zeta: Complex64) -> Complex64 {
    Complex64::i() * (1.0 + zeta) / (1.0 - zeta)
}

fn half_plane_to_disk(w: Complex64) -> Complex64 {
    (w - Complex64::i()) / (w + Complex64::i())
}

/// Point at hyperbolic distance `r` from `z` in direction `theta`, measured
/// in the disk model centred at `z`.
pub fn exp_point(z: &PointH, r: f64, theta: f64) -> PointH {
    let zeta = Complex64::from_polar((0.5 * r).tanh(), theta);
    let w = disk_to_half_plane(zeta);
    moebius_apply(&lift_to_i(z), &PointH::raw(w.re, w.im.max(f64::MIN_POSITIVE)))
}

/// Point on the geodesic segment from `z` to `w` at fraction `t` of its length.
pub fn geodesic_point(z: &PointH, w: &PointH, t: f64) -> PointH {
    let a = lift_to_i(z);
    let w0 = moebius_apply(&a.inverse(), w).to_complex();
    let zeta = half_plane_to_disk(w0);
    let len = hyperbolic_distance(z, w);
    if zeta.norm() == 0.0 {
        return *z;
    }
    exp_point(z, t * len, zeta.arg())
}
