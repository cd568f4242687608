//! Dense value and action-value tables.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

/// State values `V(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable(pub Vec<f64>);

impl ValueTable {
    pub fn zeros(n_states: usize) -> Self {
        Self(vec![0.0; n_states])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `‖self‖_∞`.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.0)
    }

    /// `‖self - other‖_∞`.
    pub fn sup_dist(&self, other: &ValueTable) -> f64 {
        sup_dist(&self.0, &other.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for ValueTable {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for ValueTable {
    type Output = f64;
    fn index(&self, s: usize) -> &f64 {
        &self.0[s]
    }
}

impl IndexMut<usize> for ValueTable {
    fn index_mut(&mut self, s: usize) -> &mut f64 {
        &mut self.0[s]
    }
}

/// Action values `Q(s, a)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
    }

    /// Panics if `values.len() != n_states * n_actions`.
    pub fn from_vec(n_states: usize, n_actions: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_states * n_actions, "QTable shape");
        Self { n_states, n_actions, values }
    }

    /// `Q(s, a) = v(s)` for every action.
    pub fn broadcast(v: &ValueTable, n_actions: usize) -> Self {
        let values = v.0.iter().flat_map(|&x| std::iter::repeat_n(x, n_actions)).collect();
        Self { n_states: v.len(), n_actions, values }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    #[inline]
    pub fn get_mut(&mut self, s: usize, a: usize) -> &mut f64 {
        &mut self.values[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Smallest-index maximizer of row `s`.
    #[inline]
    pub fn argmax(&self, s: usize) -> usize {
        argmax_first(self.row(s))
    }

    #[inline]
    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V(s) = max_a Q(s, a)`.
    pub fn max_values(&self) -> ValueTable {
        ValueTable((0..self.n_states).map(|s| self.max(s)).collect())
    }

    pub fn sup_dist(&self, other: &QTable) -> f64 {
        sup_dist(&self.values, &other.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Index of the first maximal element; ties go to the lowest index.
#[inline]
pub fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub(crate) fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch in sup distance");
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_first(&[1.0, 1.0, 1.0]), 0);
        assert_eq!(argmax_first(&[0.0, 2.0, 2.0]), 1);
        assert_eq!(argmax_first(&[-1.0]), 0);
    }

    #[test]
    fn broadcast_and_max() {
        let q = QTable::broadcast(&ValueTable(vec![1.0, -2.0]), 3);
        assert_eq!(q.row(1), &[-2.0; 3]);
        assert_eq!(q.max_values(), ValueTable(vec![1.0, -2.0]));
    }
}
