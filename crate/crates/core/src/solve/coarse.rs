//! Direct solver for the coarsest level: reverse Cuthill-McKee ordering
//! followed by banded LU with partial pivoting.

use std::collections::VecDeque;

use super::SolveError;
use crate::fem::SparseMatrix;

/// Banded LU of a symmetrically permuted sparse matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    ipiv: Vec<usize>,
    /// `order[new] = old`.
    order: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self, SolveError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SolveError::Dimension("coarse matrix is not square".into()));
        }
        let order = reverse_cuthill_mckee(a);
        let mut pos = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &j in cols {
                let (pi, pj) = (pos[i], pos[j]);
                if pi > pj {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let pi = pos[i];
            for (&j, &v) in cols.iter().zip(vals) {
                band[pi * width + pos[j] + kl - pi] += v;
            }
        }
        let scale = a.max_abs();
        let mut lu = Self { n, kl, ku, width, band, ipiv: vec![0; n], order };
        lu.factor_in_place(scale)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j + self.kl - i
    }

    fn factor_in_place(&mut self, scale: f64) -> Result<(), SolveError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.band[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return Err(SolveError::Singular(format!("coarse matrix has a zero pivot at {k}")));
            }
            self.ipiv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.band.swap(a, b);
                }
            }
            let d = self.band[self.idx(k, k)];
            let pivot_row = self.idx(k, k);
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let f = self.band[ik] / d;
                self.band[ik] = f;
                if f == 0.0 {
                    continue;
                }
                let len = last_col - k;
                let split = i * self.width;
                let dst = ik + 1 - split;
                let (head, tail) = self.band.split_at_mut(split);
                let src = &head[pivot_row + 1..pivot_row + 1 + len];
                for (o, v) in tail[dst..dst + len].iter_mut().zip(src) {
                    *o -= f * v;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut x: Vec<f64> = self.order.iter().map(|&o| b[o]).collect();
        for k in 0..n {
            x.swap(k, self.ipiv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= self.band[self.idx(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.band[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.band[self.idx(k, k)];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern, one BFS per
/// connected component, each started from a pseudo-peripheral vertex.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.nrows();
    let at = a.transpose();
    let mut adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut v: Vec<usize> = a.row(i).0.iter().chain(at.row(i).0).copied().filter(|&j| j != i).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    for list in adj.iter_mut() {
        list.sort_by_key(|&j| (degree[j], j));
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&i| (degree[i], i));
    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(&adj, seed);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut v = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, depth) = farthest(adj, v);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        v = far;
    }
    v
}

fn farthest(adj: &[Vec<usize>], start: usize) -> (usize, usize) {
    let mut dist = std::collections::HashMap::new();
    dist.insert(start, 0usize);
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d > best.1 || (d == best.1 && adj[v].len() < adj[best.0].len()) {
            best = (v, d);
        }
        for &w in &adj[v] {
            if !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_rhs() {
        let lu = BandedLu::factor(&SparseMatrix::identity(4)).unwrap();
        assert_eq!(lu.solve(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn saddle_point_needs_pivoting() {
        // [[2,1,1],[1,3,0],[1,0,0]]: zero diagonal in the last row
        let a = SparseMatrix::from_triplets(
            3,
            3,
            vec![(0, 0, 2.0), (0, 1, 1.0), (0, 2, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 0, 1.0)],
        );
        let x = [0.5, -1.0, 2.0];
        let b = a.apply(&x);
        let y = BandedLu::factor(&a).unwrap().solve(&b);
        for i in 0..3 {
            assert!((y[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let mut t = vec![];
        for i in 0..30 {
            t.push((i, i, 4.0));
            t.push((i, (i * 7 + 3) % 30, -1.0));
        }
        let a = SparseMatrix::from_triplets(30, 30, t);
        let mut o = reverse_cuthill_mckee(&a);
        o.sort_unstable();
        assert_eq!(o, (0..30).collect::<Vec<_>>());
    }
}
