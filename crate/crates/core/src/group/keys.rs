//! Tolerance-aware lookup of real-vector keys.

use std::collections::HashMap;

/// Grid spacing used to bucket keys.
const CELL: f64 = 1e-6;

/// Maps approximately-equal real keys to the same slot. Two keys match when
/// every coordinate agrees within `1e-9·max(1, |v|)`, capped at half a cell so
/// that neighbouring-cell probing is always sufficient.
#[derive(Debug, Default)]
pub struct ApproxIndex<const K: usize> {
    cells: HashMap<[i64; K], Vec<usize>>,
    keys: Vec<[f64; K]>,
}

fn tol(v: f64) -> f64 {
    (1e-9 * v.abs().max(1.0)).min(0.5 * CELL)
}

fn cell(v: f64) -> i64 {
    (v / CELL).floor() as i64
}

impl<const K: usize> ApproxIndex<K> {
    pub fn new() -> Self {
        Self { cells: HashMap::new(), keys: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, slot: usize) -> &[f64; K] {
        &self.keys[slot]
    }

    pub fn find(&self, key: &[f64; K]) -> Option<usize> {
        let base: [i64; K] = std::array::from_fn(|k| cell(key[k]));
        // Only probe a neighbour along axes where the key sits near a cell edge.
        let mut offsets: [[i64; 2]; K] = [[0, 0]; K];
        for k in 0..K {
            let t = tol(key[k]);
            let lo = cell(key[k] - t);
            let hi = cell(key[k] + t);
            offsets[k] = [lo - base[k], hi - base[k]];
        }
        let mut probe = base;
        self.search(key, &base, &offsets, 0, &mut probe)
    }

    fn search(&self, key: &[f64; K], base: &[i64; K], offsets: &[[i64; 2]; K], axis: usize, probe: &mut [i64; K]) -> Option<usize> {
        if axis == K {
            let slots = self.cells.get(probe)?;
            return slots.iter().copied().find(|&s| {
                let other = &self.keys[s];
                (0..K).all(|k| (other[k] - key[k]).abs() <= tol(key[k]).max(tol(other[k])))
            });
        }
        for off in offsets[axis][0]..=offsets[axis][1] {
            probe[axis] = base[axis] + off;
            if let Some(s) = self.search(key, base, offsets, axis + 1, probe) {
                return Some(s);
            }
        }
        probe[axis] = base[axis];
        None
    }

    /// Returns the slot of a matching key, inserting `key` if none matches.
    /// The flag is true when a new slot was created.
    pub fn find_or_insert(&mut self, key: [f64; K]) -> (usize, bool) {
        if let Some(s) = self.find(&key) {
            return (s, false);
        }
        let slot = self.keys.len();
        self.keys.push(key);
        let c: [i64; K] = std::array::from_fn(|k| cell(key[k]));
        self.cells.entry(c).or_default().push(slot);
        (slot, true)
    }
}
