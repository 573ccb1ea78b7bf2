//! Exact linear assignment.
//!
//! The solver is the shortest-augmenting-path form of Kuhn–Munkres over a
//! square matrix, O(n³). Rectangular inputs are padded. After the optimum is
//! found, the dual potentials describe every optimal assignment at once (the
//! perfect matchings of the zero-reduced-cost subgraph), which is what the
//! deterministic tie-breaking and the two-key matcher walk over.

use serde::{Deserialize, Serialize};

use super::AssignmentError;

/// Dense rectangular matrix of finite reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, AssignmentError> {
        if values.len() != rows * cols {
            return Err(AssignmentError::Shape {
                rows,
                cols,
                len: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(AssignmentError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, AssignmentError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(AssignmentError::Ragged);
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, AssignmentError> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn empty() -> Self {
        Self {
            rows: 0,
            cols: 0,
            values: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// A set of (row, col) pairs, sorted by row, plus the sum of the selected
/// entries of the matrix it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn empty() -> Self {
        Self {
            pairs: Vec::new(),
            total_cost: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Column assigned to `row`, if any.
    pub fn col_for(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == row).map(|p| p.1)
    }
}

/// Minimum-cost assignment. Rectangular matrices are completed with a padding
/// cost one above the largest entry, so `min(rows, cols)` pairs are returned.
/// Among equally cheap assignments the one whose column sequence (read in row
/// order) is lexicographically smallest wins.
pub fn hungarian(c: &CostMatrix) -> Assignment {
    if c.is_empty() {
        return Assignment::empty();
    }
    let n = c.rows.max(c.cols);
    let pad = c.values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let mut square = vec![pad; n * n];
    for r in 0..c.rows {
        square[r * n..r * n + c.cols].copy_from_slice(&c.values[r * c.cols..(r + 1) * c.cols]);
    }
    let solution = solve_square(&square, n);
    let tight = solution.tight_edges(&square, None);
    let row_to_col = lexicographic_refine(&tight, n, solution.row_to_col);

    let mut pairs = Vec::with_capacity(c.rows.min(c.cols));
    let mut total_cost = 0.0;
    for (r, &col) in row_to_col.iter().enumerate().take(c.rows) {
        if col < c.cols {
            pairs.push((r, col));
            total_cost += c.get(r, col);
        }
    }
    Assignment { pairs, total_cost }
}

/// Maximum-total-similarity matching restricted to entries `>= threshold`.
/// The matching need not be complete; pairs below the threshold are never
/// returned. `total_cost` holds the summed similarity.
pub fn match_with_threshold(sim: &CostMatrix, threshold: f64) -> Assignment {
    let eligible: Vec<bool> = sim.values.iter().map(|&s| s >= threshold).collect();
    let pairs = max_weight_matching(sim, None, &eligible);
    let total_cost = pairs.iter().map(|&(r, c)| sim.get(r, c)).sum();
    Assignment { pairs, total_cost }
}

/// Maximum-weight matching over the `eligible` entries of `primary`. When
/// `secondary` is given, ties on the primary total are broken by maximizing
/// the secondary total over the same pairs; remaining ties resolve
/// lexicographically as in [`hungarian`].
pub fn max_weight_matching(
    primary: &CostMatrix,
    secondary: Option<&CostMatrix>,
    eligible: &[bool],
) -> Vec<(usize, usize)> {
    let (rows, cols) = (primary.rows, primary.cols);
    assert_eq!(eligible.len(), rows * cols, "eligibility mask shape");
    if let Some(s) = secondary {
        assert_eq!((s.rows, s.cols), (rows, cols), "secondary key shape");
    }
    if rows == 0 || cols == 0 || !eligible.iter().any(|&e| e) {
        return Vec::new();
    }
    let n = rows.max(cols);
    let weights_to_costs = |m: &CostMatrix| {
        let mut square = vec![0.0; n * n];
        for r in 0..rows {
            for c in 0..cols {
                if eligible[r * cols + c] {
                    square[r * n + c] = -m.get(r, c);
                }
            }
        }
        square
    };

    let first_costs = weights_to_costs(primary);
    let first = solve_square(&first_costs, n);
    let mut tight = first.tight_edges(&first_costs, None);
    let mut row_to_col = first.row_to_col;

    if let Some(second) = secondary {
        let mut costs = weights_to_costs(second);
        let scale = costs.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let barrier = (n as f64 + 1.0) * 2.0 * scale;
        for (cost, &ok) in costs.iter_mut().zip(&tight) {
            if !ok {
                *cost = barrier;
            }
        }
        let refined = solve_square(&costs, n);
        tight = refined.tight_edges(&costs, Some(&tight));
        row_to_col = refined.row_to_col;
    }

    let row_to_col = lexicographic_refine(&tight, n, row_to_col);
    row_to_col
        .iter()
        .enumerate()
        .take(rows)
        .filter(|&(r, &c)| c < cols && eligible[r * cols + c])
        .map(|(r, &c)| (r, c))
        .collect()
}

struct SquareSolution {
    row_to_col: Vec<usize>,
    row_potential: Vec<f64>,
    col_potential: Vec<f64>,
}

impl SquareSolution {
    /// Edges with (numerically) zero reduced cost under the final potentials.
    fn tight_edges(&self, costs: &[f64], within: Option<&[bool]>) -> Vec<bool> {
        let n = self.row_to_col.len();
        let scale = costs.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        let tol = 1e-11 * scale;
        let mut tight = vec![false; n * n];
        for r in 0..n {
            for c in 0..n {
                let reduced = costs[r * n + c] - self.row_potential[r] - self.col_potential[c];
                tight[r * n + c] = reduced <= tol && within.map_or(true, |w| w[r * n + c]);
            }
        }
        // the solver's own matching is tight by construction
        for (r, &c) in self.row_to_col.iter().enumerate() {
            tight[r * n + c] = true;
        }
        tight
    }
}

fn solve_square(costs: &[f64], n: usize) -> SquareSolution {
    // 1-indexed potentials; column 0 is the virtual root of each search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let cur = costs[(r0 - 1) * n + (col - 1)] - u[r0] - v[col];
                if cur < min_slack[col] {
                    min_slack[col] = cur;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_slack[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for col in 1..=n {
        row_to_col[owner[col] - 1] = col - 1;
    }
    SquareSolution {
        row_to_col,
        row_potential: u[1..].to_vec(),
        col_potential: v[1..].to_vec(),
    }
}

/// Walk rows in order and give each the smallest column that still admits a
/// perfect matching of the remaining rows inside `tight`.
fn lexicographic_refine(tight: &[bool], n: usize, mut row_to_col: Vec<usize>) -> Vec<usize> {
    let mut col_to_row = vec![0usize; n];
    for (r, &c) in row_to_col.iter().enumerate() {
        col_to_row[c] = r;
    }
    let mut col_fixed = vec![false; n];

    for row in 0..n {
        for col in 0..n {
            if !tight[row * n + col] || col_fixed[col] {
                continue;
            }
            if row_to_col[row] == col {
                break;
            }
            // Hand `col` to `row`; its displaced owner must reach the column
            // `row` gives up through an alternating path of unfixed rows.
            let released = row_to_col[row];
            let displaced = col_to_row[col];
            let mut visited = vec![false; n];
            visited[col] = true;
            let mut path = Vec::new();
            if augment(
                tight,
                n,
                displaced,
                released,
                &col_fixed,
                &col_to_row,
                &mut visited,
                &mut path,
            ) {
                // path holds (row, new col) steps starting at `displaced`
                for &(r, c) in &path {
                    row_to_col[r] = c;
                    col_to_row[c] = r;
                }
                row_to_col[row] = col;
                col_to_row[col] = row;
                break;
            }
        }
        col_fixed[row_to_col[row]] = true;
    }
    row_to_col
}

#[allow(clippy::too_many_arguments)]
fn augment(
    tight: &[bool],
    n: usize,
    row: usize,
    target: usize,
    col_fixed: &[bool],
    col_to_row: &[usize],
    visited: &mut [bool],
    path: &mut Vec<(usize, usize)>,
) -> bool {
    for col in 0..n {
        if !tight[row * n + col] || col_fixed[col] || visited[col] {
            continue;
        }
        visited[col] = true;
        if col == target {
            path.push((row, col));
            return true;
        }
        path.push((row, col));
        if augment(tight, n, col_to_row[col], target, col_fixed, col_to_row, visited, path) {
            return true;
        }
        path.pop();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> CostMatrix {
        CostMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn diagonal_optimum() {
        let a = hungarian(&matrix(&[&[1.0, 2.0], &[2.0, 1.0]]));
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost, 2.0);
    }

    #[test]
    fn anti_diagonal_optimum() {
        let a = hungarian(&matrix(&[&[2.0, 1.0], &[1.0, 2.0]]));
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(a.total_cost, 2.0);
    }

    #[test]
    fn empty_matrix() {
        assert_eq!(hungarian(&CostMatrix::empty()), Assignment::empty());
        let wide = CostMatrix::new(0, 3, vec![]).unwrap();
        assert_eq!(hungarian(&wide), Assignment::empty());
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let a = hungarian(&CostMatrix::new(3, 3, vec![0.0; 9]).unwrap());
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        let a = hungarian(&matrix(&[&[1.0, 1.0, 5.0], &[1.0, 1.0, 5.0], &[5.0, 5.0, 0.0]]));
        assert_eq!(a.pairs, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn rectangular_inputs() {
        let tall = matrix(&[&[4.0], &[1.0], &[3.0]]);
        let a = hungarian(&tall);
        assert_eq!(a.pairs, vec![(1, 0)]);
        assert_eq!(a.total_cost, 1.0);

        let wide = matrix(&[&[7.0, 2.0, 2.0], &[1.0, 9.0, 9.0]]);
        let a = hungarian(&wide);
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(a.total_cost, 3.0);
    }

    #[test]
    fn negative_costs() {
        let a = hungarian(&matrix(&[&[-5.0, -1.0], &[-1.0, -5.0]]));
        assert_eq!(a.total_cost, -10.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            CostMatrix::new(1, 2, vec![0.0, f64::NAN]),
            Err(AssignmentError::NonFinite { row: 0, col: 1 })
        ));
        assert!(CostMatrix::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn threshold_matching() {
        let a = match_with_threshold(&matrix(&[&[0.9]]), 0.5);
        assert_eq!(a.pairs, vec![(0, 0)]);
        let a = match_with_threshold(&matrix(&[&[0.4]]), 0.5);
        assert!(a.is_empty());
    }

    #[test]
    fn threshold_matching_prefers_total_similarity() {
        // 0.9 alone beats 0.35 + 0.45
        let sim = matrix(&[&[0.9, 0.45], &[0.35, 0.0]]);
        let a = match_with_threshold(&sim, 0.3);
        assert_eq!(a.pairs, vec![(0, 0)]);
        // two moderate pairs beat one strong one
        let sim = matrix(&[&[0.9, 0.6], &[0.6, 0.0]]);
        let a = match_with_threshold(&sim, 0.5);
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert!((a.total_cost - 1.2).abs() < 1e-12);
    }

    #[test]
    fn secondary_key_breaks_primary_ties() {
        let primary = matrix(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let secondary = matrix(&[&[0.1, 0.9], &[0.8, 0.2]]);
        let pairs = max_weight_matching(&primary, Some(&secondary), &[true; 4]);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        // primary dominates any secondary gain
        let primary = matrix(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let pairs = max_weight_matching(&primary, Some(&secondary), &[true; 4]);
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
    }
}
