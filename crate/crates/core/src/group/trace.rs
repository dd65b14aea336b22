//! Normal presentations by geodesic tracing, and tranche decomposition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{enumerate_ball, GroupData, Word};
use crate::error::{Error, Result};
use crate::hyperbolic::{frobenius_mu, geodesic_point, hyperbolic_distance, moebius_apply, point_pair_invariant, GroupElement, PointH};

/// Crossings closer than this (as a fraction of the geodesic) count as a
/// pass through a vertex.
const VERTEX_TOL: f64 = 1e-9;
const PERTURBATION: f64 = 1e-6;
const MAX_RESTARTS: usize = 16;
const MAX_STEPS: usize = 100_000;

/// A traced normal presentation together with the distances
/// `d(ζ_j, γz₁)` for `j = 0..=r`, where `ζ_j = η₁⋯η_j z₀`.
#[derive(Clone, Debug)]
pub struct NormalTrace {
    pub word: Word,
    pub distances: Vec<f64>,
    /// The `z₁` actually used (differs from the group's after a restart).
    pub z1: PointH,
    pub restarts: usize,
}

pub fn normal_presentation(group: &GroupData, gamma: &GroupElement) -> Result<Word> {
    Ok(trace_normal_presentation(group, gamma, 0)?.word)
}

/// Traces the geodesic from `ζ_{j−1}` towards `γz₁` through the tessellation.
/// Degenerate passes through a vertex restart the trace with `z₁` moved by a
/// seeded offset of size `1e-6`.
pub fn trace_normal_presentation(group: &GroupData, gamma: &GroupElement, seed: u64) -> Result<NormalTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z1 = group.z1();
    for restart in 0..=MAX_RESTARTS {
        match trace_once(group, gamma, &z1)? {
            Some((word, distances)) => {
                let back = group.word_evaluate(&word)?;
                if !back.approx_eq(gamma, 1e-8) {
                    return Err(Error::GroupData(format!("traced word {word} evaluates to {back}, expected {gamma}")));
                }
                return Ok(NormalTrace { word, distances, z1, restarts: restart });
            }
            None => {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let base = group.z1();
                z1 = PointH::new(base.x() + PERTURBATION * theta.cos(), base.y() + PERTURBATION * theta.sin())?;
            }
        }
    }
    Err(Error::Degenerate(format!("trace of {gamma} kept hitting vertices after {MAX_RESTARTS} restarts")))
}

/// One attempt; `None` signals a vertex degeneracy.
fn trace_once(group: &GroupData, gamma: &GroupElement, z1: &PointH) -> Result<Option<(Word, Vec<f64>)>> {
    let target = moebius_apply(gamma, z1);
    let z0 = group.z0();
    let mut tau = GroupElement::IDENTITY;
    let mut letters = Vec::new();
    let mut distances = vec![hyperbolic_distance(&z0, &target)];
    for _ in 0..MAX_STEPS {
        // Work in the frame of the current domain τF.
        let w = moebius_apply(&tau.inverse(), &target);
        let u0 = point_pair_invariant(&w, &z0);
        let mut crossings: Vec<(f64, usize)> = Vec::new();
        for k in group.side_generators() {
            let centre = group.neighbour_centre(k);
            if u0 > point_pair_invariant(&w, centre) {
                crossings.push((exit_parameter(&z0, &w, centre), k));
            }
        }
        if crossings.is_empty() {
            return Ok(Some((Word::from_reduced(letters), distances)));
        }
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
        if crossings.len() > 1 && crossings[1].0 - crossings[0].0 < VERTEX_TOL {
            return Ok(None);
        }
        let k = crossings[0].1;
        letters.push(k);
        tau = tau.mul(&group.generators()[k]);
        distances.push(hyperbolic_distance(&moebius_apply(&tau, &z0), &target));
    }
    Err(Error::GroupData(format!("normal presentation of {gamma} exceeded {MAX_STEPS} steps")))
}

/// Parameter in (0, 1) where the geodesic from `z0` to `w` crosses the
/// bisector of `z0` and `centre`. Requires `w` strictly beyond the bisector.
fn exit_parameter(z0: &PointH, w: &PointH, centre: &PointH) -> f64 {
    let f = |t: f64| {
        let p = geodesic_point(z0, w, t);
        point_pair_invariant(&p, z0) - point_pair_invariant(&p, centre)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TrancheClass {
    /// A run of parabolic letters whose fixed points lie in this cusp class.
    Parabolic(usize),
    /// A single non-parabolic letter.
    Single,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tranches {
    pub blocks: Vec<Word>,
    pub classes: Vec<TrancheClass>,
}

impl Tranches {
    pub fn count(&self) -> usize {
        self.blocks.len()
    }
}

/// Groups a word into maximal runs of letters sharing a parabolic class;
/// letters tagged `None` are singleton blocks.
pub fn tranches_from_tags(letters: &[usize], tags: &[Option<usize>]) -> Tranches {
    let mut blocks: Vec<Word> = Vec::new();
    let mut classes = Vec::new();
    for &l in letters {
        match tags[l] {
            Some(c) if classes.last() == Some(&TrancheClass::Parabolic(c)) => {
                blocks.last_mut().expect("block exists").0.push(l);
            }
            Some(c) => {
                blocks.push(Word(vec![l]));
                classes.push(TrancheClass::Parabolic(c));
            }
            None => {
                blocks.push(Word(vec![l]));
                classes.push(TrancheClass::Single);
            }
        }
    }
    Tranches { blocks, classes }
}

pub fn tranche_decompose(group: &GroupData, w: &Word) -> Tranches {
    tranches_from_tags(w.letters(), group.parabolic_classes())
}

#[derive(Clone, Debug, Serialize)]
pub struct TrancheRow {
    pub word: Word,
    pub tranches: usize,
    pub log_mu: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrancheReport {
    /// `sup k/(log μ(γ) + 1)` over the ball.
    pub sup_ratio: f64,
    pub rows: Vec<TrancheRow>,
    pub round_trip_failures: usize,
    /// Steps where `d(ζ_j, γz₁) < d(ζ_{j−1}, γz₁)` failed for a non-parabolic `η_j`.
    pub single_step_violations: usize,
    /// Steps where `d(ζ_{j+1}, γz₁) < d(ζ_{j−1}, γz₁)` failed although
    /// `η_j, η_{j+1}` are not parabolic letters of one class.
    pub double_step_violations: usize,
    pub checked_steps: usize,
    pub restarts: usize,
}

pub fn tranche_bound_check(group: &GroupData, max_len: usize) -> Result<TrancheReport> {
    let tags = group.parabolic_classes();
    let mut report = TrancheReport {
        sup_ratio: 0.0,
        rows: Vec::new(),
        round_trip_failures: 0,
        single_step_violations: 0,
        double_step_violations: 0,
        checked_steps: 0,
        restarts: 0,
    };
    for (word, gamma) in enumerate_ball(group, max_len) {
        if word.is_empty() {
            continue;
        }
        let trace = trace_normal_presentation(group, &gamma, 0)?;
        report.restarts += trace.restarts;
        if !group.word_evaluate(&trace.word)?.approx_eq(&gamma, 1e-8) {
            report.round_trip_failures += 1;
        }
        let letters = trace.word.letters();
        let d = &trace.distances;
        for j in 1..=letters.len() {
            report.checked_steps += 1;
            if tags[letters[j - 1]].is_none() && d[j] >= d[j - 1] {
                report.single_step_violations += 1;
            }
            if j < letters.len() {
                let same_class = matches!((tags[letters[j - 1]], tags[letters[j]]), (Some(a), Some(b)) if a == b);
                if !same_class && d[j + 1] >= d[j - 1] {
                    report.double_step_violations += 1;
                }
            }
        }
        let k = tranche_decompose(group, &trace.word).count();
        let log_mu = frobenius_mu(&gamma).ln();
        let ratio = k as f64 / (log_mu + 1.0);
        report.sup_ratio = report.sup_ratio.max(ratio);
        report.rows.push(TrancheRow { word: trace.word, tranches: k, log_mu, ratio });
    }
    Ok(report)
}
