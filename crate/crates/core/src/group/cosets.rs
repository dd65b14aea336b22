//! Coset representatives for `Γ_a\Γ` and the double-coset table for
//! `σ_a⁻¹Γσ_b` modulo translations on both sides.

use rayon::prelude::*;
use serde::Serialize;

use super::keys::ApproxIndex;
use super::{visit_ball, visit_subtree, GroupData, Word};
use crate::error::{Error, Result};
use crate::hyperbolic::GroupElement;

/// Lower-left entries below this count as zero.
const ZERO_C: f64 = 1e-9;

/// One representative per left `Γ_a`-coset met by the ball.
#[derive(Clone, Debug)]
pub struct CosetRep {
    pub word: Word,
    pub element: GroupElement,
    /// Shortest word length at which the coset appears in the ball.
    pub shell: usize,
}

#[derive(Clone)]
struct Best {
    len: usize,
    letters: Vec<usize>,
}

impl Best {
    fn offer(&mut self, letters: &[usize]) {
        if (letters.len(), letters) < (self.len, self.letters.as_slice()) {
            self.len = letters.len();
            self.letters = letters.to_vec();
        }
    }
}

/// Representatives of `Γ_a\Γ` met by the ball of radius `max_len`, keyed on
/// the lower row of `σ_a⁻¹γσ_a`. Each representative is translated on the
/// left by a power of `γ_a` so that its top-left entry α in those
/// coordinates satisfies `0 ≤ α < m`. Sorted by (shell, word).
pub fn coset_representatives(group: &GroupData, cusp: usize, max_len: usize) -> Result<Vec<CosetRep>> {
    let data = group.cusp(cusp)?;
    let (sigma, sigma_inv) = (data.sigma, data.sigma.inverse());
    let mut index = ApproxIndex::<2>::new();
    let mut best: Vec<Best> = Vec::new();
    visit_ball(group, max_len, |letters, g| {
        let t = sigma_inv.mul(g).mul(&sigma);
        let (slot, fresh) = index.find_or_insert([t.c(), t.d()]);
        if fresh {
            best.push(Best { len: letters.len(), letters: letters.to_vec() });
        } else {
            best[slot].offer(letters);
        }
    });
    let stab = &data.stabilizer_word;
    let mut reps: Vec<CosetRep> = best
        .into_iter()
        .map(|b| {
            let g = group.word_evaluate(&Word(b.letters.clone()))?;
            let t = sigma_inv.mul(&g).mul(&sigma);
            let word = if t.c().abs() > ZERO_C {
                let k = -(t.a() / t.c()).floor() as i64;
                let prefix = group.word_power(stab, k);
                group.free_reduce(prefix.0.into_iter().chain(b.letters))
            } else {
                Word(b.letters)
            };
            let element = group.word_evaluate(&word)?;
            Ok(CosetRep { word, element, shell: b.len })
        })
        .collect::<Result<_>>()?;
    reps.sort_by(|x, y| x.shell.cmp(&y.shell).then_with(|| x.word.cmp(&y.word)));
    Ok(reps)
}

/// `max (α² + β²)/(m² + n²)` over the representatives, in
/// `σ_a⁻¹γσ_a = (α β; m n)` coordinates.
pub fn coset_normalization_constant(group: &GroupData, cusp: usize, reps: &[CosetRep]) -> Result<f64> {
    let data = group.cusp(cusp)?;
    let (sigma, sigma_inv) = (data.sigma, data.sigma.inverse());
    Ok(reps
        .iter()
        .map(|r| sigma_inv.mul(&r.element).mul(&sigma))
        .filter(|t| t.c().abs() > ZERO_C)
        .map(|t| (t.a() * t.a() + t.b() * t.b()) / (t.c() * t.c() + t.d() * t.d()))
        .fold(0.0, f64::max))
}

/// A double coset `N_ℤ ω N_ℤ` with `ω = (* *; c d)`, `c > 0`, `0 ≤ d < c`.
#[derive(Clone, Debug, Serialize)]
pub struct DoubleCosetEntry {
    pub c: f64,
    pub d: f64,
    #[serde(skip)]
    pub omega: GroupElement,
    /// Word for `σ_a ω σ_b⁻¹ ∈ Γ`.
    pub word: Word,
    /// Shortest ball word meeting this double coset.
    pub source_length: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoubleCosetData {
    pub cusp_a: usize,
    pub cusp_b: usize,
    /// Whether the identity double coset `Ω_∞` is present (`a = b`).
    pub delta: bool,
    /// Sorted by `(c, d)`.
    pub entries: Vec<DoubleCosetEntry>,
    pub c_max: f64,
    pub word_length: usize,
    /// True when the ball of radius `word_length + 2` adds no new `(c, d)`.
    pub saturated: bool,
    pub keys_added_by_extension: usize,
}

impl DoubleCosetData {
    /// Distinct moduli, ascending.
    pub fn moduli(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for e in &self.entries {
            if out.last().map_or(true, |&c| !same_modulus(c, e.c)) {
                out.push(e.c);
            }
        }
        out
    }

    /// All `d`-classes at modulus `c`.
    pub fn classes_at(&self, c: f64) -> Result<&[DoubleCosetEntry]> {
        let lo = self.entries.partition_point(|e| e.c < c && !same_modulus(e.c, c));
        let hi = self.entries.partition_point(|e| e.c < c || same_modulus(e.c, c));
        if lo == hi {
            return Err(Error::MissingModulus(c));
        }
        Ok(&self.entries[lo..hi])
    }
}

pub(crate) fn same_modulus(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Lower row of `σ_a⁻¹γσ_b` with `c ≥ 0` (sign of PSL₂ fixed).
fn lower_row(row: [f64; 2], g: &GroupElement, sb: &GroupElement) -> (f64, f64) {
    let x = row[0] * g.a() + row[1] * g.c();
    let y = row[0] * g.b() + row[1] * g.d();
    let c = x * sb.a() + y * sb.c();
    let d = x * sb.b() + y * sb.d();
    if c < 0.0 {
        (-c, -d)
    } else {
        (c, d)
    }
}

fn residue(c: f64, d: f64) -> f64 {
    let r = d - (d / c).floor() * c;
    if c - r <= 1e-9 * c.max(1.0) {
        0.0
    } else {
        r
    }
}

struct PairTable {
    index: ApproxIndex<2>,
    best: Vec<Best>,
}

impl PairTable {
    fn new() -> Self {
        Self { index: ApproxIndex::new(), best: Vec::new() }
    }

    fn offer(&mut self, key: [f64; 2], letters: &[usize]) {
        let (slot, fresh) = self.index.find_or_insert(key);
        if fresh {
            self.best.push(Best { len: letters.len(), letters: letters.to_vec() });
        } else {
            self.best[slot].offer(letters);
        }
    }
}

/// Double-coset tables for every ordered cusp pair, from one walk over the
/// ball of radius `max_len + 2`. Index `a·(#cusps) + b`.
pub fn double_cosets_all(group: &GroupData, max_len: usize, c_max: f64) -> Result<Vec<DoubleCosetData>> {
    if !(c_max > 0.0) {
        return Err(Error::Domain(format!("c_max must be positive, got {c_max}")));
    }
    let cusps = group.cusps();
    let h = cusps.len();
    let rows: Vec<[f64; 2]> = cusps
        .iter()
        .map(|c| {
            let si = c.sigma.inverse();
            [si.c(), si.d()]
        })
        .collect();
    let sigmas: Vec<GroupElement> = cusps.iter().map(|c| c.sigma).collect();
    let limit = c_max * (1.0 + 1e-12);
    let walk_len = max_len + 2;

    let collect = |first: usize| -> Vec<PairTable> {
        let mut tables: Vec<PairTable> = (0..h * h).map(|_| PairTable::new()).collect();
        visit_subtree(group, walk_len, first, |letters, g| {
            for a in 0..h {
                for b in 0..h {
                    let (c, d) = lower_row(rows[a], g, &sigmas[b]);
                    if c > ZERO_C && c <= limit {
                        tables[a * h + b].offer([c, residue(c, d)], letters);
                    }
                }
            }
        });
        tables
    };
    let parts: Vec<Vec<PairTable>> = (0..group.generator_count()).into_par_iter().map(collect).collect();

    let mut out = Vec::with_capacity(h * h);
    for a in 0..h {
        for b in 0..h {
            let mut merged = PairTable::new();
            for part in &parts {
                let t = &part[a * h + b];
                for (slot, best) in t.best.iter().enumerate() {
                    let key = *t.index.key(slot);
                    let (s, fresh) = merged.index.find_or_insert(key);
                    if fresh {
                        merged.best.push(best.clone());
                    } else {
                        merged.best[s].offer(&best.letters);
                    }
                }
            }
            out.push(finish_pair(group, a, b, max_len, c_max, merged)?);
        }
    }
    Ok(out)
}

fn finish_pair(group: &GroupData, a: usize, b: usize, max_len: usize, c_max: f64, table: PairTable) -> Result<DoubleCosetData> {
    let (ca, cb) = (&group.cusps()[a], &group.cusps()[b]);
    let sa_inv = ca.sigma.inverse();
    let mut entries = Vec::new();
    let mut added = 0;
    for best in table.best {
        if best.len > max_len {
            added += 1;
            continue;
        }
        let g = group.word_evaluate(&Word(best.letters.clone()))?;
        let omega = sa_inv.mul(&g).mul(&cb.sigma);
        // Right translation puts d into [0, c), left translation puts a' there too.
        let k = -(omega.d() / omega.c()).floor() as i64;
        let j = -(omega.a() / omega.c()).floor() as i64;
        let word = group.free_reduce(
            group
                .word_power(&ca.stabilizer_word, j)
                .0
                .into_iter()
                .chain(best.letters.iter().copied())
                .chain(group.word_power(&cb.stabilizer_word, k).0),
        );
        let gamma = group.word_evaluate(&word)?;
        let omega = sa_inv.mul(&gamma).mul(&cb.sigma);
        let d = residue(omega.c(), omega.d());
        entries.push(DoubleCosetEntry { c: omega.c(), d, omega, word, source_length: best.len });
    }
    entries.sort_by(|x, y| x.c.total_cmp(&y.c).then(x.d.total_cmp(&y.d)));
    // Equal moduli may differ in the last bits; order them by d within a group.
    entries.sort_by(|x, y| {
        if same_modulus(x.c, y.c) {
            x.d.total_cmp(&y.d)
        } else {
            x.c.total_cmp(&y.c)
        }
    });
    Ok(DoubleCosetData {
        cusp_a: a,
        cusp_b: b,
        delta: a == b,
        entries,
        c_max,
        word_length: max_len,
        saturated: added == 0,
        keys_added_by_extension: added,
    })
}

/// Double-coset table for one cusp pair.
pub fn double_cosets(group: &GroupData, a: usize, b: usize, max_len: usize, c_max: f64) -> Result<DoubleCosetData> {
    group.cusp(a)?;
    group.cusp(b)?;
    let h = group.cusps().len();
    let mut all = double_cosets_all(group, max_len, c_max)?;
    Ok(all.swap_remove(a * h + b))
}
