use std::sync::Arc;

use rayon::prelude::*;

use super::space::FeSpace;
use crate::error::{Error, Result};

/// Compressed-row sparsity pattern with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Rows given as (unsorted, possibly duplicated) column lists.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < n));
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx }
    }

    /// Full coupling between all DoFs that share a cell.
    pub fn for_space(space: &FeSpace) -> Self {
        let nn = space.n_nodes();
        let nc = space.components();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
        for cell in 0..space.mesh().n_cells() {
            let nodes = space.cell_nodes(cell);
            for &a in nodes {
                adj[a].extend_from_slice(nodes);
            }
        }
        let mut row_ptr = Vec::with_capacity(nn * nc + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut nbrs in adj {
            nbrs.sort_unstable();
            nbrs.dedup();
            for _ in 0..nc {
                for &b in &nbrs {
                    for c in 0..nc {
                        col_idx.push(b * nc + c);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Self { n: nn * nc, row_ptr, col_idx }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Position of `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_range(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }
}

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let nnz = pattern.nnz();
        Self { pattern, values: vec![0.0; nnz] }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let mut m = Self::zeros(Arc::new(SparsityPattern::from_rows(rows)));
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds to an existing entry; panics if `(i, j)` is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pattern.find(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let r = p.row_range(i);
            *yi = p.col_idx[r.clone()].iter().zip(&self.values[r]).map(|(&j, v)| v * x[j]).sum();
        });
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n_rows();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.pattern.row_range(i) {
                row[self.pattern.col_idx[k]] = self.values[k];
            }
        }
        d
    }

    /// Scatter one cell's dense block (row-major) and load vector.
    pub fn scatter(&mut self, rhs: &mut [f64], local: &LocalContribution) {
        let n = local.dofs.len();
        for (a, &i) in local.dofs.iter().enumerate() {
            rhs[i] += local.rhs[a];
            let r = self.pattern.row_range(i);
            let cols = &self.pattern.col_idx[r.clone()];
            let mut cursor = 0;
            for (b, &j) in local.dofs.iter().enumerate() {
                let v = local.matrix[a * n + b];
                if v == 0.0 {
                    continue;
                }
                // dofs are mostly ascending: search forward from the last hit first
                let k = match cols[cursor..].binary_search(&j) {
                    Ok(k) => cursor + k,
                    Err(_) => {
                        cols.binary_search(&j).unwrap_or_else(|_| panic!("entry ({i}, {j}) not in sparsity pattern"))
                    }
                };
                cursor = k;
                self.values[r.start + k] += v;
            }
        }
    }

    /// Replace constrained rows by identity rows and eliminate the
    /// constrained columns from every other row, moving their contribution
    /// to the right-hand side. Keeps a symmetric matrix symmetric.
    pub fn apply_constraints(&mut self, rhs: &mut [f64], constraints: &[(usize, f64)]) {
        let n = self.n_rows();
        let mut value_of = vec![None; n];
        for &(d, v) in constraints {
            value_of[d] = Some(v);
        }
        let p = self.pattern.clone();
        for i in 0..n {
            if let Some(v) = value_of[i] {
                for k in p.row_range(i) {
                    self.values[k] = if p.col_idx[k] == i { 1.0 } else { 0.0 };
                }
                rhs[i] = v;
            } else {
                for k in p.row_range(i) {
                    if let Some(v) = value_of[p.col_idx[k]] {
                        rhs[i] -= self.values[k] * v;
                        self.values[k] = 0.0;
                    }
                }
            }
        }
    }
}

/// Dense cell block produced by a local assembler.
#[derive(Debug, Clone, Default)]
pub struct LocalContribution {
    pub dofs: Vec<usize>,
    /// Row-major `dofs.len() x dofs.len()`.
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl LocalContribution {
    pub fn new(dofs: Vec<usize>) -> Self {
        let n = dofs.len();
        Self { dofs, matrix: vec![0.0; n * n], rhs: vec![0.0; n] }
    }
}

/// Assemble a global system from per-cell contributions computed in
/// parallel. Contributions are scattered in cell order, so the result is
/// bitwise independent of the thread count.
pub fn assemble<F>(pattern: &Arc<SparsityPattern>, n_cells: usize, local: F) -> Result<(CsrMatrix, Vec<f64>)>
where
    F: Fn(usize) -> Result<LocalContribution> + Sync,
{
    assemble_with(pattern, n_cells, || (), |_, cell| local(cell))
}

/// [`assemble`] with per-worker scratch state created by `init`. The local
/// assembler must not let results depend on what the scratch held before.
pub fn assemble_with<S, I, F>(
    pattern: &Arc<SparsityPattern>,
    n_cells: usize,
    init: I,
    local: F,
) -> Result<(CsrMatrix, Vec<f64>)>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize) -> Result<LocalContribution> + Sync,
{
    let mut matrix = CsrMatrix::zeros(pattern.clone());
    let mut rhs = vec![0.0; pattern.n_rows()];
    const CHUNK: usize = 256;
    let mut start = 0;
    while start < n_cells {
        let end = (start + CHUNK).min(n_cells);
        let blocks: Vec<Result<LocalContribution>> =
            (start..end).into_par_iter().map_init(&init, |s, cell| local(s, cell)).collect();
        for (cell, b) in (start..end).zip(blocks) {
            let b = b.map_err(|e| match e {
                e @ Error::Assembly { .. } => e,
                e => Error::Assembly { cell, message: e.to_string() },
            })?;
            matrix.scatter(&mut rhs, &b);
        }
        start = end;
    }
    Ok((matrix, rhs))
}

/// Vector-only variant of [`assemble`].
pub fn assemble_vector<F>(n: usize, n_cells: usize, local: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<(Vec<usize>, Vec<f64>)> + Sync,
{
    let mut out = vec![0.0; n];
    let blocks: Vec<Result<(Vec<usize>, Vec<f64>)>> = (0..n_cells).into_par_iter().map(&local).collect();
    for b in blocks {
        let (dofs, vals) = b?;
        for (d, v) in dofs.into_iter().zip(vals) {
            out[d] += v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{build_structured_mesh, BoxTags};

    #[test]
    fn pattern_of_two_q1_cells() {
        let m = Arc::new(build_structured_mesh(&[2.0, 1.0], &[2, 1], BoxTags::channel()).unwrap());
        let s = FeSpace::new(m, 1, 1).unwrap();
        let p = SparsityPattern::for_space(&s);
        // corner nodes see 4 nodes, middle nodes see 6
        assert_eq!(p.n_rows(), 6);
        assert_eq!(p.nnz(), 4 * 4 + 2 * 6);
        let s2 = FeSpace::new(s.mesh().clone(), 1, 3).unwrap();
        assert_eq!(SparsityPattern::for_space(&s2).nnz(), 9 * (4 * 4 + 2 * 6));
    }

    #[test]
    fn constraints_keep_symmetry_and_solution() {
        // 1D Laplacian, u(0) = 1, u(4) = 3: solution linear
        let n = 5;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let mut a = CsrMatrix::from_triplets(n, &t);
        let mut b = vec![0.0; n];
        a.apply_constraints(&mut b, &[(0, 1.0), (4, 3.0)]);
        let d = a.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
        assert_eq!(b, vec![1.0, 1.0, 0.0, 3.0, 3.0]);
    }

    #[test]
    fn assembly_is_deterministic() {
        let m = Arc::new(build_structured_mesh(&[1.0, 1.0], &[8, 8], BoxTags::channel()).unwrap());
        let s = FeSpace::new(m, 2, 1).unwrap();
        let p = Arc::new(SparsityPattern::for_space(&s));
        let local = |c: usize| {
            let dofs = s.cell_nodes(c).to_vec();
            let mut l = LocalContribution::new(dofs);
            for (k, v) in l.matrix.iter_mut().enumerate() {
                *v = ((c * 31 + k) as f64).sin() * 1e-3;
            }
            l.rhs.iter_mut().enumerate().for_each(|(k, v)| *v = (k as f64 + c as f64).cos());
            Ok(l)
        };
        let (a1, b1) = assemble(&p, 64, local).unwrap();
        let (a2, b2) = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| assemble(&p, 64, local).unwrap());
        assert_eq!(a1.values(), a2.values());
        assert_eq!(b1, b2);
    }
}
