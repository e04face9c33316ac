//! Sparse symmetric positive definite linear algebra: CSR storage with a fixed
//! pattern, reverse Cuthill–McKee ordering, envelope Cholesky and Jacobi
//! preconditioned conjugate gradients.

use std::collections::VecDeque;
use std::sync::Arc;

/// Symmetric sparsity pattern in compressed-row form; column indices sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl Pattern {
    /// Pattern containing the diagonal and every pair listed in `pairs`
    /// (symmetrised).
    pub fn from_pairs(n: usize, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for (i, j) in pairs {
            rows[i].push(j);
            rows[j].push(i);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Self { row_ptr, col_idx }
    }

    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Storage slot of entry `(i, j)`; panics if it is outside the pattern.
    pub fn slot(&self, i: usize, j: usize) -> usize {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        self.row_ptr[i]
            + row
                .binary_search(&j)
                .unwrap_or_else(|_| panic!("entry ({i}, {j}) outside sparsity pattern"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.pattern.slot(i, j);
        self.values[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.pattern.col_idx[self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.pattern.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `Σ_k c_k A_k` over matrices sharing one pattern.
    pub fn combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let pattern = terms[0].1.pattern.clone();
        let mut values = vec![0.0; pattern.nnz()];
        for (c, m) in terms {
            debug_assert!(Arc::ptr_eq(&pattern, &m.pattern) || *pattern == *m.pattern);
            for (v, w) in values.iter_mut().zip(&m.values) {
                *v += c * w;
            }
        }
        CsrMatrix { pattern, values }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    /// Principal submatrix on `rows` (in the given order), as a new matrix.
    pub fn submatrix(&self, rows: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &r) in rows.iter().enumerate() {
            local[r] = k;
        }
        let p = &self.pattern;
        let pairs: Vec<(usize, usize)> = rows
            .iter()
            .flat_map(|&r| {
                let local = &local;
                (p.row_ptr[r]..p.row_ptr[r + 1])
                    .map(move |k| (local[r], local[p.col_idx[k]]))
                    .filter(|&(_, c)| c != usize::MAX)
            })
            .collect();
        let sub = Arc::new(Pattern::from_pairs(rows.len(), pairs.iter().copied()));
        let mut m = CsrMatrix::zeros(sub);
        for &r in rows {
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                let c = local[p.col_idx[k]];
                if c != usize::MAX {
                    m.add(local[r], c, self.values[k]);
                }
            }
        }
        m
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Reverse Cuthill–McKee ordering; `perm[k]` is the original index placed at
/// position `k`.
pub fn reverse_cuthill_mckee(pattern: &Pattern) -> Vec<usize> {
    let n = pattern.n();
    let degree: Vec<usize> = (0..n)
        .map(|i| pattern.row_ptr[i + 1] - pattern.row_ptr[i])
        .collect();
    let neighbours = |i: usize| &pattern.col_idx[pattern.row_ptr[i]..pattern.row_ptr[i + 1]];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize| -> (usize, usize) {
        // (last node of the deepest level with minimum degree, depth)
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            if level[v] > level[last] || (level[v] == level[last] && degree[v] < degree[last]) {
                last = v;
            }
            for &w in neighbours(v) {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (last, level[last])
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start via repeated BFS
        let mut start = seed;
        let (mut far, mut depth) = bfs_levels(start);
        for _ in 0..8 {
            let (f2, d2) = bfs_levels(far);
            if d2 <= depth {
                break;
            }
            start = far;
            far = f2;
            depth = d2;
        }
        let _ = far;
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = neighbours(v)
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorError {
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Cholesky factor in envelope (variable band) storage of `P A Pᵀ`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &CsrMatrix, perm: &[usize]) -> Result<Self, FactorError> {
        let n = a.n();
        let p = a.pattern();
        let mut inv = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            inv[i] = k;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, &pi) in inv.iter().enumerate() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let pj = inv[p.col_idx[k]];
                if pj < pi {
                    first[pi] = first[pi].min(pj);
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (i, &pi) in inv.iter().enumerate() {
            for k in p.row_ptr[i]..p.row_ptr[i + 1] {
                let pj = inv[p.col_idx[k]];
                if pj <= pi {
                    data[offset[pi] + pj - first[pi]] += a.values()[k];
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let (head, row_i) = data.split_at_mut(offset[i]);
                let row_j = &head[offset[j]..offset[j + 1]];
                let s = dot(&row_i[lo - fi..j - fi], &row_j[lo - fj..j - fj]);
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - s) / ljj;
            }
            let row_i = &mut data[offset[i]..offset[i + 1]];
            let d = row_i[i - fi] - dot(&row_i[..i - fi], &row_i[..i - fi]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(FactorError::NotPositiveDefinite { row: i, pivot: d });
            }
            row_i[i - fi] = d.sqrt();
        }
        Ok(Self {
            perm: perm.to_vec(),
            first,
            offset,
            data,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (yj, l) in y[fi..i].iter_mut().zip(&row[..i - fi]) {
                *yj -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients, stopping at
/// `‖b − Ax‖ ≤ tol ‖b‖`. `x` holds the initial guess on entry.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> IterativeStats {
    let n = a.n();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return IterativeStats {
            iterations: 0,
            relative_residual: 0.0,
        };
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let ax = a.mul_vec(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = norm(&r) / bnorm;
        it += 1;
    }
    // report the true residual rather than the recursively updated one
    let ax = a.mul_vec(x);
    let true_rel = norm(
        &b.iter()
            .zip(&ax)
            .map(|(bi, ai)| bi - ai)
            .collect::<Vec<_>>(),
    ) / bnorm;
    IterativeStats {
        iterations: it,
        relative_residual: true_rel,
    }
}

pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let bn = norm(b);
    if bn == 0.0 {
        norm(&r)
    } else {
        norm(&r) / bn
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 2D five-point Laplacian plus a shift, on an `m × m` grid.
    fn shifted_laplacian(m: usize, shift: f64) -> CsrMatrix {
        let n = m * m;
        let id = |i: usize, j: usize| j * m + i;
        let mut pairs = Vec::new();
        for j in 0..m {
            for i in 0..m {
                if i + 1 < m {
                    pairs.push((id(i, j), id(i + 1, j)));
                }
                if j + 1 < m {
                    pairs.push((id(i, j), id(i, j + 1)));
                }
            }
        }
        let pattern = Arc::new(Pattern::from_pairs(n, pairs.iter().copied()));
        let mut a = CsrMatrix::zeros(pattern);
        for &(p, q) in &pairs {
            a.add(p, q, -1.0);
            a.add(q, p, -1.0);
            a.add(p, p, 1.0);
            a.add(q, q, 1.0);
        }
        for i in 0..n {
            a.add(i, i, shift);
        }
        a
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let a = shifted_laplacian(12, 0.1);
        let b: Vec<f64> = (0..a.n()).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let perm = reverse_cuthill_mckee(a.pattern());
        let chol = EnvelopeCholesky::factor(&a, &perm).unwrap();
        let x = chol.solve(&b);
        assert!(relative_residual(&a, &x, &b) < 1e-13);
        let mut y = vec![0.0; a.n()];
        let stats = conjugate_gradient(&a, &b, &mut y, 1e-12, 1000);
        assert!(stats.relative_residual <= 1e-12);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = shifted_laplacian(9, 1.0);
        let mut perm = reverse_cuthill_mckee(a.pattern());
        perm.sort_unstable();
        assert_eq!(perm, (0..81).collect::<Vec<_>>());
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = shifted_laplacian(4, -1.0);
        let perm: Vec<usize> = (0..a.n()).collect();
        assert!(EnvelopeCholesky::factor(&a, &perm).is_err());
    }

    proptest! {
        #[test]
        fn solve_inverts_multiply(seed in 0u64..1000, m in 2usize..9) {
            let a = shifted_laplacian(m, 0.5);
            let x: Vec<f64> = (0..a.n()).map(|i| ((i as u64 * 31 + seed) % 17) as f64 * 0.1 - 0.8).collect();
            let b = a.mul_vec(&x);
            let chol = EnvelopeCholesky::factor(&a, &reverse_cuthill_mckee(a.pattern())).unwrap();
            let y = chol.solve(&b);
            for (u, v) in x.iter().zip(&y) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
    }
}
