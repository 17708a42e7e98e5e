//! Exact maximum-weight bipartite matching on square nonnegative weight
//! matrices, with a factorial brute-force oracle for small sizes.
//!
//! The solver is the O(n^3) shortest-augmenting-path Hungarian method. Among
//! optimal matchings it returns the one whose row-sorted pair list is
//! lexicographically smallest: every optimum is a perfect matching of the
//! equality subgraph of the final duals, and the lexicographic minimum of
//! those is found greedily row by row with alternating-cycle searches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest size accepted by [`brute_force_mwm`].
pub const BRUTE_FORCE_MAX_N: usize = 9;

/// A set of (input, output) circuit connections, kept sorted by input.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    /// Builds a matching, rejecting any repeated input or output.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let m = Self::from_pairs_unchecked(pairs);
        if !m.is_legal() {
            return Err(Error::Argument(format!(
                "pairs {:?} share an input or an output",
                m.pairs
            )));
        }
        Ok(m)
    }

    /// Keeps whatever pairs are given; use [`Matching::is_legal`] to audit.
    pub fn from_pairs_unchecked(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        Matching { pairs }
    }

    /// Matching from a row-to-column assignment.
    pub fn from_assignment(assignment: &[usize]) -> Self {
        Matching {
            pairs: assignment.iter().copied().enumerate().collect(),
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    /// True when no input and no output appears twice.
    pub fn is_legal(&self) -> bool {
        let mut inputs: Vec<usize> = self.pairs.iter().map(|p| p.0).collect();
        let mut outputs: Vec<usize> = self.pairs.iter().map(|p| p.1).collect();
        inputs.sort_unstable();
        outputs.sort_unstable();
        inputs.windows(2).all(|w| w[0] != w[1]) && outputs.windows(2).all(|w| w[0] != w[1])
    }

    pub fn weight(&self, weights: &Matrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| weights.get(i, j)).sum()
    }

    /// Drops the pairs for which `keep` is false.
    pub fn retain(&mut self, mut keep: impl FnMut(usize, usize) -> bool) {
        self.pairs.retain(|&(i, j)| keep(i, j));
    }
}

fn check_weights(weights: &Matrix) -> Result<()> {
    if let Some((k, x)) = weights
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
    {
        let n = weights.n();
        return Err(Error::Argument(format!(
            "weight ({}, {}) = {x} is not finite and nonnegative",
            k / n,
            k % n
        )));
    }
    Ok(())
}

/// Maximum-weight full matching of `weights`, with the lexicographic tie-break.
pub fn max_weight_matching(weights: &Matrix) -> Result<Matching> {
    check_weights(weights)?;
    let mut solver = MwmSolver::new(weights.n());
    let assignment = solver.solve(weights.as_slice());
    Ok(Matching::from_assignment(assignment))
}

/// Reusable buffers for repeated solves at a fixed size.
#[derive(Debug, Clone)]
pub struct MwmSolver {
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    col_owner: Vec<usize>,
    way: Vec<usize>,
    minv: Vec<f64>,
    used: Vec<bool>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    tight_by_row: Vec<Vec<usize>>,
    tight_by_col: Vec<Vec<usize>>,
    reachable: Vec<bool>,
    next: Vec<usize>,
    stack: Vec<usize>,
}

impl MwmSolver {
    pub fn new(n: usize) -> Self {
        MwmSolver {
            n,
            u: vec![0.0; n + 1],
            v: vec![0.0; n + 1],
            col_owner: vec![0; n + 1],
            way: vec![0; n + 1],
            minv: vec![0.0; n + 1],
            used: vec![false; n + 1],
            row_to_col: vec![0; n],
            col_to_row: vec![0; n],
            tight_by_row: vec![Vec::new(); n],
            tight_by_col: vec![Vec::new(); n],
            reachable: vec![false; n],
            next: vec![0; n],
            stack: Vec::with_capacity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves for the row-major `n*n` weights (assumed finite, nonnegative) and
    /// returns the column assigned to each row.
    pub fn solve(&mut self, weights: &[f64]) -> &[usize] {
        let n = self.n;
        assert_eq!(weights.len(), n * n, "weight slice does not match solver size");
        if n == 0 {
            return &self.row_to_col;
        }
        self.hungarian(weights);
        for j in 1..=n {
            let i = self.col_owner[j] - 1;
            self.row_to_col[i] = j - 1;
            self.col_to_row[j - 1] = i;
        }
        self.lexicographic_optimum(weights);
        &self.row_to_col
    }

    // 1-indexed minimization of cost = -weight; index 0 is the virtual root.
    fn hungarian(&mut self, w: &[f64]) {
        let n = self.n;
        self.u.fill(0.0);
        self.v.fill(0.0);
        self.col_owner.fill(0);
        self.way.fill(0);
        for i in 1..=n {
            self.col_owner[0] = i;
            let mut j0 = 0;
            self.minv.fill(f64::INFINITY);
            self.used.fill(false);
            loop {
                self.used[j0] = true;
                let i0 = self.col_owner[j0];
                let ui0 = self.u[i0];
                let row = &w[(i0 - 1) * n..i0 * n];
                let mut delta = f64::INFINITY;
                let mut j1 = 0;
                for j in 1..=n {
                    if !self.used[j] {
                        let cur = -row[j - 1] - ui0 - self.v[j];
                        if cur < self.minv[j] {
                            self.minv[j] = cur;
                            self.way[j] = j0;
                        }
                        if self.minv[j] < delta {
                            delta = self.minv[j];
                            j1 = j;
                        }
                    }
                }
                for j in 0..=n {
                    if self.used[j] {
                        self.u[self.col_owner[j]] += delta;
                        self.v[j] -= delta;
                    } else {
                        self.minv[j] -= delta;
                    }
                }
                j0 = j1;
                if self.col_owner[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = self.way[j0];
                self.col_owner[j0] = self.col_owner[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
    }

    fn lexicographic_optimum(&mut self, w: &[f64]) {
        let n = self.n;
        let scale = w.iter().copied().fold(0.0, f64::max);
        let eps = 1e-10 * scale;
        for list in self.tight_by_row.iter_mut().chain(self.tight_by_col.iter_mut()) {
            list.clear();
        }
        for i in 0..n {
            for j in 0..n {
                let reduced = -w[i * n + j] - self.u[i + 1] - self.v[j + 1];
                if reduced <= eps || self.row_to_col[i] == j {
                    self.tight_by_row[i].push(j);
                    self.tight_by_col[j].push(i);
                }
            }
        }

        for i in 0..n {
            let home = self.row_to_col[i];
            if self.tight_by_row[i].first() == Some(&home) {
                continue;
            }
            // Columns whose owner (a row after i) can be shifted along tight
            // edges so that `home` is freed for nobody but row i to leave.
            self.reachable.fill(false);
            self.reachable[home] = true;
            self.stack.clear();
            self.stack.push(home);
            while let Some(c) = self.stack.pop() {
                for &r in &self.tight_by_col[c] {
                    if r > i {
                        let rc = self.row_to_col[r];
                        if !self.reachable[rc] {
                            self.reachable[rc] = true;
                            self.next[rc] = c;
                            self.stack.push(rc);
                        }
                    }
                }
            }
            let target = *self.tight_by_row[i]
                .iter()
                .find(|&&j| self.reachable[j])
                .expect("home column is always reachable");
            if target == home {
                continue;
            }
            let mut cur = target;
            let mut mover = self.col_to_row[target];
            self.row_to_col[i] = target;
            self.col_to_row[target] = i;
            loop {
                let c = self.next[cur];
                let displaced = self.col_to_row[c];
                self.row_to_col[mover] = c;
                self.col_to_row[c] = mover;
                if c == home {
                    break;
                }
                mover = displaced;
                cur = c;
            }
        }
    }
}

/// Exhaustive search over all `n!` assignments, visited in lexicographic
/// order so the first maximum found carries the same tie-break as the solver.
pub fn brute_force_mwm(weights: &Matrix) -> Result<Matching> {
    check_weights(weights)?;
    let n = weights.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::Argument(format!(
            "brute force refused for n = {n} > {BRUTE_FORCE_MAX_N}"
        )));
    }

    struct Search<'a> {
        w: &'a Matrix,
        current: Vec<usize>,
        taken: Vec<bool>,
        best: Vec<usize>,
        best_weight: f64,
    }

    impl Search<'_> {
        fn visit(&mut self, row: usize) {
            let n = self.w.n();
            if row == n {
                let weight: f64 = self
                    .current
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| self.w.get(i, j))
                    .sum();
                if weight > self.best_weight {
                    self.best_weight = weight;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            for j in 0..n {
                if !self.taken[j] {
                    self.taken[j] = true;
                    self.current.push(j);
                    self.visit(row + 1);
                    self.current.pop();
                    self.taken[j] = false;
                }
            }
        }
    }

    let mut search = Search {
        w: weights,
        current: Vec::with_capacity(n),
        taken: vec![false; n],
        best: (0..n).collect(),
        best_weight: f64::NEG_INFINITY,
    };
    search.visit(0);
    Ok(Matching::from_assignment(&search.best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn dominant_diagonal() {
        let w = m(&[&[7.0, 1.0, 1.0], &[1.0, 7.0, 1.0], &[1.0, 1.0, 7.0]]);
        let mm = max_weight_matching(&w).unwrap();
        assert_eq!(mm.pairs(), &[(0, 0), (1, 1), (2, 2)]);
        assert_eq!(mm.weight(&w), 21.0);
    }

    #[test]
    fn two_by_two() {
        let w = m(&[&[1.0, 2.0], &[3.0, 5.0]]);
        let mm = max_weight_matching(&w).unwrap();
        assert_eq!(mm.pairs(), &[(0, 0), (1, 1)]);
        assert_eq!(mm.weight(&w), 6.0);
        assert_eq!(brute_force_mwm(&w).unwrap().weight(&w), 6.0);
    }

    #[test]
    fn zero_matrix_gives_identity_under_tie_break() {
        let w = Matrix::zeros(4);
        let mm = max_weight_matching(&w).unwrap();
        assert_eq!(mm.weight(&w), 0.0);
        assert_eq!(mm, brute_force_mwm(&w).unwrap());
        assert_eq!(mm.pairs(), &[(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn single_port() {
        let w = m(&[&[4.0]]);
        assert_eq!(brute_force_mwm(&w).unwrap().pairs(), &[(0, 0)]);
        assert_eq!(max_weight_matching(&w).unwrap().pairs(), &[(0, 0)]);
    }

    #[test]
    fn tie_break_prefers_lexicographically_smallest() {
        // Both anti-diagonal and diagonal weigh 2; identity is smaller.
        let w = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(max_weight_matching(&w).unwrap().pairs(), &[(0, 0), (1, 1)]);
        let w = m(&[&[0.0, 5.0, 5.0], &[5.0, 0.0, 5.0], &[5.0, 5.0, 0.0]]);
        assert_eq!(
            max_weight_matching(&w).unwrap().pairs(),
            &[(0, 1), (1, 2), (2, 0)]
        );
    }

    #[test]
    fn rejects_negative_and_large_brute_force() {
        let w = m(&[&[1.0, -2.0], &[0.0, 1.0]]);
        assert!(matches!(max_weight_matching(&w), Err(Error::Argument(_))));
        assert!(matches!(
            brute_force_mwm(&Matrix::zeros(10)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn legality_check() {
        assert!(Matching::new(vec![(0, 1), (1, 1)]).is_err());
        assert!(!Matching::from_pairs_unchecked(vec![(0, 1), (0, 2)]).is_legal());
        assert!(Matching::new(vec![(2, 0), (0, 2)]).unwrap().is_legal());
    }

    fn int_matrix(max_n: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_n).prop_flat_map(|n| {
            prop::collection::vec(0u8..6, n * n).prop_map(move |v| {
                Matrix::from_fn(n, |i, j| v[i * n + j] as f64)
            })
        })
    }

    proptest! {
        #[test]
        fn matches_oracle_on_small_integer_weights(w in int_matrix(6)) {
            let fast = max_weight_matching(&w).unwrap();
            let slow = brute_force_mwm(&w).unwrap();
            prop_assert!(fast.is_legal());
            prop_assert_eq!(fast.len(), w.n());
            prop_assert_eq!(fast.weight(&w), slow.weight(&w));
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn scaling_preserves_argmax(w in int_matrix(6), c in 1u32..50) {
            let scaled = w.scaled(c as f64);
            prop_assert_eq!(
                max_weight_matching(&w).unwrap(),
                max_weight_matching(&scaled).unwrap()
            );
        }
    }
}
