//! Sparse LDLᵀ factorization for symmetric quasi-definite matrices.
//!
//! The KKT systems produced by the interior-point method keep a fixed
//! sparsity pattern across iterations, so the work is split into a symbolic
//! phase (fill-reducing ordering, elimination tree, column counts) done once
//! and a numeric phase repeated every iteration.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const NONE: usize = usize::MAX;

/// Upper-triangular pattern of a symmetric matrix assembled from triplets.
///
/// Each input triplet is mapped to a storage slot so that values can be
/// refreshed cheaply with [`KktPattern::assemble`].
#[derive(Debug, Clone)]
pub struct KktPattern {
    n: usize,
    perm: Vec<usize>,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    slot_of_entry: Vec<usize>,
}

impl KktPattern {
    /// Builds the permuted upper-triangular pattern. Entries may be given in
    /// either triangle; duplicates are summed.
    pub fn new(n: usize, rows: &[usize], cols: &[usize]) -> Self {
        assert_eq!(rows.len(), cols.len());
        let perm = minimum_degree_order(n, rows, cols);
        let mut iperm = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }

        // permuted (row, col) with row <= col
        let mut entries: Vec<(usize, usize, usize)> = rows
            .iter()
            .zip(cols)
            .enumerate()
            .map(|(e, (&r, &c))| {
                let (pr, pc) = (iperm[r], iperm[c]);
                if pr <= pc {
                    (pc, pr, e)
                } else {
                    (pr, pc, e)
                }
            })
            .collect();
        // every diagonal must be present so the numeric phase can regularize
        for k in 0..n {
            entries.push((k, k, NONE));
        }
        entries.sort_unstable_by_key(|&(c, r, _)| (c, r));

        let mut colptr = vec![0usize; n + 1];
        let mut rowidx = Vec::with_capacity(entries.len());
        let mut slot_of_entry = vec![0usize; rows.len()];
        let mut last: Option<(usize, usize)> = None;
        for &(c, r, e) in &entries {
            if last != Some((c, r)) {
                rowidx.push(r);
                colptr[c + 1] += 1;
                last = Some((c, r));
            }
            if e != NONE {
                slot_of_entry[e] = rowidx.len() - 1;
            }
        }
        for c in 0..n {
            colptr[c + 1] += colptr[c];
        }
        Self {
            n,
            perm,
            colptr,
            rowidx,
            slot_of_entry,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    /// Sums triplet values into slot storage.
    pub fn assemble(&self, values: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.rowidx.len(), 0.0);
        for (e, &v) in values.iter().enumerate() {
            out[self.slot_of_entry[e]] += v;
        }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LdlError {
    /// A zero pivot survived regularization.
    ZeroPivot(usize),
}

/// Numeric factor `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    perm: Vec<usize>,
    // scratch
    y_vals: Vec<f64>,
    y_idx: Vec<usize>,
    elim: Vec<usize>,
    marker: Vec<bool>,
    next_space: Vec<usize>,
    /// Number of pivots replaced by the dynamic regularization in the last
    /// factorization.
    pub bumped: usize,
}

impl LdlFactor {
    pub fn symbolic(pattern: &KktPattern) -> Self {
        let n = pattern.n;
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in pattern.colptr[j]..pattern.colptr[j + 1] {
                let mut i = pattern.rowidx[p];
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz = lp[n];
        Self {
            n,
            etree,
            lp,
            li: vec![0; nnz],
            lx: vec![0.0; nnz],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            perm: pattern.perm.clone(),
            y_vals: vec![0.0; n],
            y_idx: vec![0; n],
            elim: vec![0; n],
            marker: vec![false; n],
            next_space: vec![0; n],
            bumped: 0,
        }
    }

    /// Numeric factorization. `signs[k]` gives the expected pivot sign of the
    /// original (unpermuted) index `k`; pivots with the wrong sign or tiny
    /// magnitude are replaced by `sign * delta`.
    pub fn factor(
        &mut self,
        pattern: &KktPattern,
        values: &[f64],
        signs: &[f64],
        eps: f64,
        delta: f64,
    ) -> Result<(), LdlError> {
        let n = self.n;
        self.bumped = 0;
        for i in 0..n {
            self.next_space[i] = self.lp[i];
            self.marker[i] = false;
            self.y_vals[i] = 0.0;
        }
        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in pattern.colptr[k]..pattern.colptr[k + 1] {
                let b = pattern.rowidx[p];
                if b == k {
                    self.d[k] = values[p];
                    continue;
                }
                self.y_vals[b] = values[p];
                if !self.marker[b] {
                    self.marker[b] = true;
                    self.elim[0] = b;
                    let mut ne = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if self.marker[next] {
                            break;
                        }
                        self.marker[next] = true;
                        self.elim[ne] = next;
                        ne += 1;
                        next = self.etree[next];
                    }
                    while ne > 0 {
                        ne -= 1;
                        self.y_idx[nnz_y] = self.elim[ne];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = self.y_idx[i];
                let tmp = self.next_space[c];
                let yc = self.y_vals[c];
                for j in self.lp[c]..tmp {
                    self.y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                let l = yc * self.dinv[c];
                self.lx[tmp] = l;
                self.d[k] -= yc * l;
                self.next_space[c] += 1;
                self.y_vals[c] = 0.0;
                self.marker[c] = false;
            }
            let sign = signs[self.perm[k]];
            if self.d[k] * sign <= eps {
                self.d[k] = sign * delta;
                self.bumped += 1;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(LdlError::ZeroPivot(k));
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `A x = b` in the original ordering, overwriting `b`.
    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let n = self.n;
        work.clear();
        work.extend(self.perm.iter().map(|&p| b[p]));
        for i in 0..n {
            let xi = work[i];
            for j in self.lp[i]..self.lp[i + 1] {
                work[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            work[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut xi = work[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * work[self.li[j]];
            }
            work[i] = xi;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = work[k];
        }
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }
}

/// Greedy minimum-degree ordering on the explicit elimination graph.
///
/// Nodes are eliminated one at a time; neighbours of the eliminated node are
/// joined into a clique. Ties are broken by node index so the ordering is
/// deterministic.
pub fn minimum_degree_order(n: usize, rows: &[usize], cols: &[usize]) -> Vec<usize> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (&r, &c) in rows.iter().zip(cols) {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        order.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        for &u in &nbrs {
            merged.clear();
            let (a, b) = (&adj[u], &nbrs);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                let next = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) if x < y => {
                        i += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if y < x => {
                        j += 1;
                        y
                    }
                    (Some(&x), Some(_)) => {
                        i += 1;
                        j += 1;
                        x
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v && !eliminated[next] {
                    merged.push(next);
                }
            }
            std::mem::swap(&mut adj[u], &mut merged);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}
