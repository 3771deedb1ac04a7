//! Sparse LU factorisation with partial pivoting (Gilbert–Peierls).
//!
//! Columns are factorised one at a time: a depth-first search over the
//! already-computed part of L finds the sparse triangular-solve pattern in
//! topological order, the numeric update follows it, and the pivot is the
//! largest remaining entry of the column. Row permutations are tracked
//! implicitly through original row indices, so no data moves on a swap.

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Column-compressed copy of a square matrix.
struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csc {
    fn from_csr(a: &SparseOperator) -> Csc {
        let n = a.rows;
        let mut counts = vec![0usize; n + 1];
        for &c in &a.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut col_ptr = counts.clone();
        let mut row_idx = vec![0usize; a.nnz()];
        let mut values = vec![0.0; a.nnz()];
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (c, v) in cols.iter().zip(vals) {
                let slot = col_ptr[*c];
                row_idx[slot] = r;
                values[slot] = *v;
                col_ptr[*c] += 1;
            }
        }
        Csc {
            col_ptr: counts,
            row_idx,
            values,
        }
    }
}

/// LU factors of P A = L U with unit lower-triangular L. Both factors are
/// stored by column; L rows keep original indices, U rows are pivot indices.
pub struct LuFactors {
    n: usize,
    l_col_ptr: Vec<usize>,
    l_row_idx: Vec<usize>,
    l_values: Vec<f64>,
    u_col_ptr: Vec<usize>,
    u_row_idx: Vec<usize>,
    u_values: Vec<f64>,
    u_diag: Vec<f64>,
    /// pivot_row[k] = original row chosen as the k-th pivot.
    pivot_row: Vec<usize>,
    pub pivot_min: f64,
    pub pivot_max: f64,
}

impl LuFactors {
    pub fn nnz(&self) -> usize {
        self.l_values.len() + self.u_values.len() + self.n
    }

    /// Solves A x = b for the factorised matrix.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        // Forward substitution L y = P b, carried on original row indices.
        let mut work = b.to_vec();
        let mut y = vec![0.0; n];
        for k in 0..n {
            let yk = work[self.pivot_row[k]];
            y[k] = yk;
            if yk != 0.0 {
                for idx in self.l_col_ptr[k]..self.l_col_ptr[k + 1] {
                    work[self.l_row_idx[idx]] -= self.l_values[idx] * yk;
                }
            }
        }
        // Back substitution U x = y in pivot coordinates.
        let mut x = y;
        for k in (0..n).rev() {
            let xk = x[k] / self.u_diag[k];
            x[k] = xk;
            if xk != 0.0 {
                for idx in self.u_col_ptr[k]..self.u_col_ptr[k + 1] {
                    x[self.u_row_idx[idx]] -= self.u_values[idx] * xk;
                }
            }
        }
        x
    }
}

/// Factorises a square sparse matrix. Returns a zero-pivot error with the
/// breakdown column when the matrix is singular.
pub fn factorize(a: &SparseOperator) -> Result<LuFactors> {
    if a.rows != a.cols {
        return Err(Error::DimensionMismatch(format!(
            "LU needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let csc = Csc::from_csr(a);

    let mut l_col_ptr = vec![0usize];
    let mut l_row_idx: Vec<usize> = Vec::new();
    let mut l_values: Vec<f64> = Vec::new();
    let mut u_col_ptr = vec![0usize];
    let mut u_row_idx: Vec<usize> = Vec::new();
    let mut u_values: Vec<f64> = Vec::new();
    let mut u_diag = vec![0.0; n];
    let mut pivot_row = vec![usize::MAX; n];
    // pinv[original row] = pivot position, or MAX if not yet pivotal.
    let mut pinv = vec![usize::MAX; n];

    let mut x = vec![0.0; n];
    let mut visited = vec![u32::MAX; n];
    let mut topo: Vec<usize> = Vec::with_capacity(n);
    let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

    let mut pivot_min = f64::INFINITY;
    let mut pivot_max: f64 = 0.0;

    for k in 0..n {
        // Scatter column k and collect its pattern.
        let mut pattern: Vec<usize> = Vec::new();
        for idx in csc.col_ptr[k]..csc.col_ptr[k + 1] {
            let r = csc.row_idx[idx];
            x[r] = csc.values[idx];
            pattern.push(r);
        }

        // Symbolic phase: depth-first search through the graph of L to find
        // every pivotal row reachable from the column pattern. The postorder
        // in `topo` has dependents before their sources.
        topo.clear();
        let stamp = k as u32;
        for &start in &pattern {
            if visited[start] == stamp {
                continue;
            }
            visited[start] = stamp;
            if pinv[start] == usize::MAX {
                continue; // non-pivotal rows have no dependencies
            }
            dfs_stack.push((start, l_col_ptr[pinv[start]]));
            while let Some(&mut (node, ref mut next)) = dfs_stack.last_mut() {
                let end = l_col_ptr[pinv[node] + 1];
                let mut descended = false;
                while *next < end {
                    let child = l_row_idx[*next];
                    *next += 1;
                    if visited[child] != stamp {
                        visited[child] = stamp;
                        if pinv[child] != usize::MAX {
                            dfs_stack.push((child, l_col_ptr[pinv[child]]));
                            descended = true;
                            break;
                        }
                    }
                }
                if !descended {
                    topo.push(node);
                    dfs_stack.pop();
                }
            }
        }

        // Numeric phase: sparse triangular solve, sources first (reverse
        // postorder is a valid topological order of the dependency DAG).
        for &node in topo.iter().rev() {
            let col = pinv[node];
            let xj = x[node];
            if xj != 0.0 {
                for idx in l_col_ptr[col]..l_col_ptr[col + 1] {
                    x[l_row_idx[idx]] -= l_values[idx] * xj;
                }
            }
        }

        // Gather the nonzero set of the eliminated column: the original
        // pattern plus every L-row reachable from the topo nodes (fill-in).
        let mut full: Vec<usize> = pattern.clone();
        for &node in topo.iter() {
            let col = pinv[node];
            for idx in l_col_ptr[col]..l_col_ptr[col + 1] {
                full.push(l_row_idx[idx]);
            }
        }
        full.sort_unstable();
        full.dedup();

        // Pivot: the largest entry among non-pivotal rows.
        let mut pivot = usize::MAX;
        let mut pivot_val = 0.0f64;
        for &r in &full {
            if pinv[r] == usize::MAX && x[r].abs() > pivot_val.abs() {
                pivot = r;
                pivot_val = x[r];
            }
        }
        if pivot == usize::MAX || pivot_val == 0.0 {
            // Clean the workspace before reporting the breakdown.
            for &r in &full {
                x[r] = 0.0;
            }
            return Err(Error::Singular { step: k });
        }

        pivot_row[k] = pivot;
        pinv[pivot] = k;
        u_diag[k] = pivot_val;
        pivot_min = pivot_min.min(pivot_val.abs());
        pivot_max = pivot_max.max(pivot_val.abs());

        for &r in &full {
            let v = x[r];
            x[r] = 0.0;
            if v == 0.0 || r == pivot {
                continue;
            }
            if pinv[r] != usize::MAX && pinv[r] < k {
                u_row_idx.push(pinv[r]);
                u_values.push(v);
            } else if pinv[r] == usize::MAX {
                l_row_idx.push(r);
                l_values.push(v / pivot_val);
            }
        }
        l_col_ptr.push(l_row_idx.len());
        u_col_ptr.push(u_row_idx.len());
    }

    Ok(LuFactors {
        n,
        l_col_ptr,
        l_row_idx,
        l_values,
        u_col_ptr,
        u_row_idx,
        u_values,
        u_diag,
        pivot_row,
        pivot_min,
        pivot_max,
    })
}
