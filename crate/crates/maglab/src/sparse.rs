//! Minimal sparse linear algebra for the solvers: triplet assembly, CSR
//! storage, reverse Cuthill–McKee reordering and an envelope LDLᵀ
//! factorization with iterative refinement.
//!
//! Everything here is deterministic: assembly sums run in a fixed sorted
//! order, so symmetric scatters produce bitwise-symmetric matrices and
//! repeated runs produce identical factors.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("direct solve stalled at relative residual {achieved:.3e} (required {required:.3e})")]
    ResidualTooLarge { achieved: f64, required: f64 },
    #[error("matrix dimension mismatch: {0}")]
    Dimension(String),
}

/// Triplet (COO) accumulator. Duplicate entries are summed on conversion.
#[derive(Debug, Clone)]
pub struct Coo {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Coo {
    pub fn new(n: usize) -> Self {
        Coo { nrows: n, ncols: n, entries: Vec::new() }
    }

    pub fn rect(nrows: usize, ncols: usize) -> Self {
        Coo { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Scatter a symmetric contribution: both (i, j) and (j, i) receive `v`.
    /// Because conversion sums duplicates in one fixed order, the result is
    /// bitwise symmetric.
    pub fn push_sym(&mut self, i: usize, j: usize, v: f64) {
        self.push(i, j, v);
        if i != j {
            self.push(j, i, v);
        }
    }

    pub fn to_csr(&self) -> Csr {
        let mut sorted = self.entries.clone();
        // Stable sort: duplicates keep insertion order, so mirrored scatters
        // sum in the same order on both sides of the diagonal.
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col = Vec::new();
        let mut val = Vec::new();
        for &(i, j, v) in &sorted {
            if col.len() > row_ptr[i] && *col.last().unwrap() == j && row_ptr[i + 1] == col.len() {
                // same (i, j) as previous entry → accumulate
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] = col.len();
            }
        }
        // make row_ptr cumulative over empty rows too
        for i in 0..self.nrows {
            row_ptr[i + 1] = row_ptr[i + 1].max(row_ptr[i]);
        }
        Csr { nrows: self.nrows, ncols: self.ncols, row_ptr, col, val }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    /// Dimension of a square matrix (asserts squareness).
    pub fn n(&self) -> usize {
        assert_eq!(self.nrows, self.ncols, "matrix is not square");
        self.nrows
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// y = Aᵀ x.
    pub fn matvec_t_alloc(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col[k]] += self.val[k] * x[i];
            }
        }
        y
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows.min(self.ncols)];
        for i in 0..d.len() {
            for (j, v) in self.row(i) {
                if j == i {
                    d[i] = v;
                }
            }
        }
        d
    }

    /// Largest |off-diagonal asymmetry| relative to the largest entry.
    /// Assembly is arranged so this is exactly zero; used in debug checks.
    pub fn asymmetry(&self) -> f64 {
        let mut max_entry = 0.0f64;
        for &v in &self.val {
            max_entry = max_entry.max(v.abs());
        }
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            for (j, v) in self.row(i) {
                let mut vt = 0.0;
                for (jj, vv) in self.row(j) {
                    if jj == i {
                        vt = vv;
                    }
                }
                worst = worst.max((v - vt).abs());
            }
        }
        if max_entry > 0.0 {
            worst / max_entry
        } else {
            worst
        }
    }
}

/// Reverse Cuthill–McKee ordering of the matrix graph (pattern assumed
/// structurally symmetric). Returns `perm` with `perm[new] = old`.
pub fn rcm_order(a: &Csr) -> Vec<usize> {
    let n = a.n();
    let degree: Vec<usize> = (0..n)
        .map(|i| a.row(i).filter(|&(j, _)| j != i).count())
        .collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut neighbors: Vec<usize> = Vec::new();

    // Pseudo-peripheral start per component: run BFS from the component's
    // minimum-degree node, restart from the farthest minimum-degree node.
    let bfs_far = |start: usize, visited: &[bool]| -> usize {
        let mut seen = vec![false; n];
        let mut frontier = vec![start];
        seen[start] = true;
        let mut last = start;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            let mut best = (usize::MAX, usize::MAX);
            for &u in &frontier {
                for (v, _) in a.row(u) {
                    if v != u && !seen[v] && !visited[v] {
                        seen[v] = true;
                        next.push(v);
                        if (degree[v], v) < best {
                            best = (degree[v], v);
                        }
                    }
                }
            }
            if best.1 != usize::MAX {
                last = best.1;
            }
            frontier = next;
        }
        last
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // lowest-degree unvisited node seeds the component
        let mut start = seed;
        for v in seed + 1..n {
            if !visited[v] && (degree[v], v) < (degree[start], start) {
                start = v;
            }
        }
        let start = bfs_far(bfs_far(start, &visited), &visited);

        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            neighbors.clear();
            for (v, _) in a.row(u) {
                if v != u && !visited[v] {
                    visited[v] = true;
                    neighbors.push(v);
                }
            }
            neighbors.sort_by_key(|&v| (degree[v], v));
            for &v in &neighbors {
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (skyline) LDLᵀ factorization of a symmetric matrix under an RCM
/// permutation. Near-zero pivots are floored and repaired afterwards by
/// iterative refinement against the unfactored matrix.
pub struct DirectSolver {
    n: usize,
    perm: Vec<usize>, // perm[new] = old
    first: Vec<usize>,
    off: Vec<usize>,
    env: Vec<f64>,
    d: Vec<f64>,
    /// True if any pivot needed flooring; callers should refine.
    pub regularized: bool,
}

impl DirectSolver {
    pub fn factor(a: &Csr) -> Result<Self, LinearError> {
        let n = a.n();
        let perm = rcm_order(a);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Permuted rows, lower triangle only, as (col, val) sorted by col.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i_new in 0..n {
            let i_old = perm[i_new];
            for (j_old, v) in a.row(i_old) {
                let j_new = iperm[j_old];
                if j_new <= i_new {
                    rows[i_new].push((j_new, v));
                }
            }
            rows[i_new].sort_unstable_by_key(|&(j, _)| j);
        }

        let mut first = vec![0usize; n];
        for i in 0..n {
            first[i] = rows[i].first().map_or(i, |&(j, _)| j);
        }
        // The envelope must be monotone for the columnwise sweep to stay
        // inside allocated rows (skyline property): first[i] can only refer
        // to rows whose envelopes are already complete, which the algorithm
        // below handles row by row, so no adjustment is needed.
        let mut off = vec![0usize; n + 1];
        for i in 0..n {
            off[i + 1] = off[i] + (i - first[i]);
        }
        let mut env = vec![0.0f64; off[n]];
        let mut d = vec![0.0f64; n];

        let mut max_diag = 0.0f64;
        for i in 0..n {
            for &(j, v) in &rows[i] {
                if j == i {
                    max_diag = max_diag.max(v.abs());
                }
            }
        }
        let floor = if max_diag > 0.0 { 1e-30 * max_diag } else { f64::MIN_POSITIVE };
        let mut regularized = false;

        let mut work = vec![0.0f64; n];
        for i in 0..n {
            let fi = first[i];
            for w in &mut work[fi..=i] {
                *w = 0.0;
            }
            let mut aii = 0.0;
            for &(j, v) in &rows[i] {
                if j == i {
                    aii = v;
                } else {
                    work[j] = v;
                }
            }
            // Row i of L accumulates in `work` (finalized entries for k < j)
            // and is copied into the envelope once complete.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = work[j];
                for k in k0..j {
                    s -= work[k] * env[off[j] + (k - fj)] * d[k];
                }
                work[j] = s / d[j];
            }
            let mut dii = aii;
            for k in fi..i {
                dii -= work[k] * work[k] * d[k];
            }
            if dii.abs() < floor {
                dii = if dii >= 0.0 { floor } else { -floor };
                regularized = true;
            }
            d[i] = dii;
            env[off[i]..off[i + 1]].copy_from_slice(&work[fi..i]);
        }

        Ok(DirectSolver { n, perm, first, off, env, d, regularized })
    }

    /// Single triangular solve (no refinement).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            y[i] = b[self.perm[i]];
        }
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.env[self.off[i] + (k - fi)] * y[k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = y[i];
            let fi = self.first[i];
            for k in fi..i {
                y[k] -= self.env[self.off[i] + (k - fi)] * xi;
            }
        }
        let mut x = vec![0.0f64; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    /// Solve with iterative refinement until the true residual satisfies
    /// ‖b − Ax‖ ≤ `tol_rel`·‖b‖ (or ‖b‖ = 0). Returns the achieved relative
    /// residual alongside the solution.
    pub fn solve_refined(
        &self,
        a: &Csr,
        b: &[f64],
        tol_rel: f64,
    ) -> Result<(Vec<f64>, f64), LinearError> {
        if a.nrows != self.n || a.ncols != self.n || b.len() != self.n {
            return Err(LinearError::Dimension(format!(
                "matrix {}×{} vs factor dim {} and rhs {}",
                a.nrows,
                a.ncols,
                self.n,
                b.len()
            )));
        }
        let norm_b = norm2(b);
        let mut x = self.solve(b);
        if norm_b == 0.0 {
            return Ok((vec![0.0; self.n], 0.0));
        }
        let mut r = vec![0.0; self.n];
        let mut best_rel = f64::INFINITY;
        for _ in 0..20 {
            a.matvec(&x, &mut r);
            for i in 0..self.n {
                r[i] = b[i] - r[i];
            }
            let rel = norm2(&r) / norm_b;
            if rel <= tol_rel {
                return Ok((x, rel));
            }
            if rel >= 0.5 * best_rel {
                // refinement has stalled
                if rel <= tol_rel {
                    return Ok((x, rel));
                }
                if best_rel <= tol_rel {
                    break;
                }
                // keep going a little in case of slow contraction
            }
            best_rel = best_rel.min(rel);
            let dx = self.solve(&r);
            for i in 0..self.n {
                x[i] += dx[i];
            }
        }
        a.matvec(&x, &mut r);
        for i in 0..self.n {
            r[i] = b[i] - r[i];
        }
        let rel = norm2(&r) / norm_b;
        if rel <= tol_rel {
            Ok((x, rel))
        } else {
            Err(LinearError::ResidualTooLarge { achieved: rel, required: tol_rel })
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense LU with partial pivoting; the independent oracle for small systems.
    pub(crate) fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, piv);
            x.swap(k, piv);
            assert!(m[k][k] != 0.0, "singular oracle matrix");
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let xj = x[j];
                x[i] -= m[i][j] * xj;
            }
            x[i] /= m[i][i];
        }
        x
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64)
    }

    fn random_spd(n: usize, seed: u64) -> (Coo, Vec<Vec<f64>>) {
        let mut st = seed;
        let mut dense = vec![vec![0.0; n]; n];
        let mut coo = Coo::new(n);
        for i in 0..n {
            for j in 0..=i {
                if i == j || lcg(&mut st) < 0.25 {
                    let v = if i == j { 4.0 + 4.0 * lcg(&mut st) } else { lcg(&mut st) - 0.5 };
                    dense[i][j] = v;
                    dense[j][i] = v;
                    coo.push_sym(i, j, v);
                }
            }
        }
        (coo, dense)
    }

    #[test]
    fn coo_sums_duplicates_and_stays_symmetric() {
        let mut coo = Coo::new(3);
        coo.push_sym(0, 1, 1.5);
        coo.push_sym(1, 0, 2.5); // same undirected pair, scattered twice
        coo.push(2, 2, 1.0);
        coo.push(2, 2, 2.0);
        let a = coo.to_csr();
        assert_eq!(a.nnz(), 3);
        let get = |i: usize, j: usize| a.row(i).find(|&(c, _)| c == j).map(|(_, v)| v);
        assert_eq!(get(0, 1), Some(4.0));
        assert_eq!(get(1, 0), Some(4.0));
        assert_eq!(get(2, 2), Some(3.0));
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn matvec_and_diag() {
        let mut coo = Coo::new(3);
        coo.push(0, 0, 2.0);
        coo.push(0, 2, 1.0);
        coo.push(1, 1, 3.0);
        coo.push(2, 0, 1.0);
        coo.push(2, 2, 4.0);
        let a = coo.to_csr();
        let y = a.matvec_alloc(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![5.0, 6.0, 13.0]);
        assert_eq!(a.diag(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn rcm_is_permutation_and_shrinks_bandwidth() {
        // 1D path graph numbered badly: RCM should recover bandwidth 1.
        let n = 40;
        let scramble: Vec<usize> = (0..n).map(|i| (i * 17) % n).collect();
        let mut coo = Coo::new(n);
        for i in 0..n {
            coo.push(scramble[i], scramble[i], 2.0);
            if i + 1 < n {
                coo.push_sym(scramble[i], scramble[i + 1], -1.0);
            }
        }
        let a = coo.to_csr();
        let perm = rcm_order(&a);
        let mut seen = vec![false; n];
        for &p in &perm {
            assert!(!seen[p]);
            seen[p] = true;
        }
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut bw = 0usize;
        for i in 0..n {
            for (j, _) in a.row(i) {
                bw = bw.max(iperm[i].abs_diff(iperm[j]));
            }
        }
        assert_eq!(bw, 1);
    }

    #[test]
    fn ldlt_matches_dense_oracle() {
        for seed in [1u64, 7, 42] {
            let (coo, dense) = random_spd(30, seed);
            let a = coo.to_csr();
            let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
            let solver = DirectSolver::factor(&a).unwrap();
            assert!(!solver.regularized);
            let (x, rel) = solver.solve_refined(&a, &b, 1e-12).unwrap();
            assert!(rel <= 1e-12);
            let x_ref = dense_solve(&dense, &b);
            for i in 0..30 {
                assert!((x[i] - x_ref[i]).abs() <= 1e-8 * (1.0 + x_ref[i].abs()));
            }
        }
    }

    #[test]
    fn refinement_handles_wild_scaling() {
        // Diagonal scales spanning 1e-8 … 1e8 with off-diagonal coupling.
        let n = 50;
        let mut coo = Coo::new(n);
        for i in 0..n {
            let s = 10f64.powf(-8.0 + 16.0 * (i as f64) / ((n - 1) as f64));
            coo.push(i, i, s);
            if i + 1 < n {
                let si = 10f64.powf(-8.0 + 16.0 * (i as f64) / ((n - 1) as f64));
                let sj = 10f64.powf(-8.0 + 16.0 * ((i + 1) as f64) / ((n - 1) as f64));
                coo.push_sym(i, i + 1, 0.1 * (si * sj).sqrt());
            }
        }
        let a = coo.to_csr();
        let b = vec![1.0; n];
        let solver = DirectSolver::factor(&a).unwrap();
        let (x, rel) = solver.solve_refined(&a, &b, 1e-12).unwrap();
        assert!(rel <= 1e-12);
        let r = a.matvec_alloc(&x);
        let res: f64 = (0..n).map(|i| (r[i] - 1.0).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * norm2(&b) * 10.0);
    }

    #[test]
    fn singular_matrix_reports_residual_failure() {
        let mut coo = Coo::new(2);
        coo.push(0, 0, 1.0);
        coo.push_sym(0, 1, 1.0);
        coo.push(1, 1, 1.0); // rank-1 after elimination: [1 1; 1 1]
        let a = coo.to_csr();
        let solver = DirectSolver::factor(&a).unwrap();
        // Inconsistent rhs: no solution exists.
        let err = solver.solve_refined(&a, &[1.0, 0.0], 1e-10);
        assert!(matches!(err, Err(LinearError::ResidualTooLarge { .. })));
    }
}
