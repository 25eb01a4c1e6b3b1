//! Convex-combination bookkeeping for away steps.

use std::collections::BTreeMap;

use crate::linalg::{axpy, dot};
use crate::region::{VertexHandle, VertexKey};

/// Weights below this are dropped after every update.
pub const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Entry {
    point: Vec<f64>,
    weight: f64,
}

/// The vertices `V(x)` whose convex combination is `P_T⊥ x`, with weights.
///
/// Ordered by key so that ties in the away-vertex search resolve to the
/// smallest key.
#[derive(Clone, Debug, Default)]
pub struct ActiveVertexSet {
    entries: BTreeMap<VertexKey, Entry>,
}

impl ActiveVertexSet {
    pub fn singleton(v: VertexHandle) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            v.key,
            Entry {
                point: v.point,
                weight: 1.0,
            },
        );
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &VertexKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn weight(&self, key: &VertexKey) -> Option<f64> {
        self.entries.get(key).map(|e| e.weight)
    }

    pub fn weight_sum(&self) -> f64 {
        self.entries.values().map(|e| e.weight).sum()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VertexKey> {
        self.entries.keys()
    }

    /// `argmax_{v ∈ V} ⟨c, v⟩`, returning the key, point, weight and value.
    pub fn away_vertex(&self, c: &[f64]) -> Option<(&VertexKey, &[f64], f64, f64)> {
        let mut best: Option<(&VertexKey, &[f64], f64, f64)> = None;
        for (key, e) in &self.entries {
            let val = dot(c, &e.point);
            if best.is_none_or(|b| val > b.3) {
                best = Some((key, &e.point, e.weight, val));
            }
        }
        best
    }

    /// Frank-Wolfe step of length `alpha` toward `s`.
    ///
    /// A full step collapses the set to `{s}`; otherwise every weight is
    /// scaled by `1 − α` and `α` is added to `s`.
    pub fn apply_fw_step(&mut self, s: &VertexHandle, alpha: f64) {
        if alpha >= 1.0 {
            *self = Self::singleton(s.clone());
            return;
        }
        if alpha <= 0.0 {
            return;
        }
        for e in self.entries.values_mut() {
            e.weight *= 1.0 - alpha;
        }
        self.entries
            .entry(s.key.clone())
            .or_insert_with(|| Entry {
                point: s.point.clone(),
                weight: 0.0,
            })
            .weight += alpha;
        self.cleanup();
    }

    /// Away step of length `alpha` from the vertex `key`.
    ///
    /// At `alpha == alpha_max` the vertex is dropped; otherwise every weight is
    /// scaled by `1 + α` and `α` is subtracted from the away vertex.
    pub fn apply_away_step(&mut self, key: &VertexKey, alpha: f64, alpha_max: f64) {
        if alpha <= 0.0 {
            return;
        }
        for e in self.entries.values_mut() {
            e.weight *= 1.0 + alpha;
        }
        if alpha >= alpha_max {
            self.entries.remove(key);
        } else if let Some(e) = self.entries.get_mut(key) {
            e.weight -= alpha;
        }
        self.cleanup();
    }

    /// Drop weights below [`WEIGHT_FLOOR`] and renormalize to sum one.
    pub fn cleanup(&mut self) {
        self.entries.retain(|_, e| e.weight >= WEIGHT_FLOOR);
        let total = self.weight_sum();
        if total > 0.0 {
            for e in self.entries.values_mut() {
                e.weight /= total;
            }
        }
    }

    /// `Σ_v λ_v v`.
    pub fn reconstruct(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for e in self.entries.values() {
            axpy(e.weight, &e.point, &mut out);
        }
        out
    }
}
