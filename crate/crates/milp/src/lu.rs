//! Sparse LU factorization of simplex bases with product-form updates.
//!
//! Right-looking Gaussian elimination with Markowitz pivot selection and
//! threshold partial pivoting. Row and column singletons are taken first so
//! triangular parts of the basis produce no fill. Basis changes between
//! refactorizations are appended as eta columns.

use std::collections::BTreeSet;

const PIVOT_ABS_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.1;
const SEARCH_COLUMNS: usize = 4;

/// Basis positions that could not be pivoted, paired with rows left without
/// a pivot. Both lists have the same length.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct SparseLu {
    m: usize,
    prow: Vec<usize>,
    pcol: Vec<usize>,
    diag: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    // Column-wise U and row-wise L, both keyed by pivot index, so the
    // triangular passes of FTRAN and BTRAN can skip zero entries.
    uc_start: Vec<usize>,
    uc_piv: Vec<usize>,
    uc_val: Vec<f64>,
    lr_start: Vec<usize>,
    lr_piv: Vec<usize>,
    lr_val: Vec<f64>,
    eta_pos: Vec<usize>,
    eta_piv: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
    /// Eta entries grouped by position: `(eta index, value)` in eta order.
    eta_by_pos: Vec<Vec<(u32, f64)>>,
}

struct CountSet {
    counts: Vec<usize>,
    set: BTreeSet<(usize, usize)>,
}

impl CountSet {
    fn new(counts: Vec<usize>) -> Self {
        let set = counts.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Self { counts, set }
    }

    fn change(&mut self, i: usize, new: usize) {
        let old = self.counts[i];
        if old != new && self.set.remove(&(old, i)) {
            self.set.insert((new, i));
        }
        self.counts[i] = new;
    }

    fn remove(&mut self, i: usize) {
        self.set.remove(&(self.counts[i], i));
    }
}

impl SparseLu {
    /// Factorizes the `m x m` matrix whose `k`-th column is `columns[k]`
    /// (sparse `(row, value)` lists).
    pub fn factorize(m: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut cols: Vec<Vec<(usize, f64)>> = columns
            .into_iter()
            .map(|c| c.into_iter().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut row_pat: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, _) in col {
                row_pat[i].push(j);
            }
        }
        let mut col_active = vec![true; m];
        let mut row_active = vec![true; m];
        let mut ccount = CountSet::new(cols.iter().map(Vec::len).collect());
        let mut rcount = CountSet::new(row_pat.iter().map(Vec::len).collect());

        let mut lu = SparseLu {
            m,
            prow: Vec::with_capacity(m),
            pcol: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            uc_start: Vec::new(),
            uc_piv: Vec::new(),
            uc_val: Vec::new(),
            lr_start: Vec::new(),
            lr_piv: Vec::new(),
            lr_val: Vec::new(),
            eta_pos: Vec::new(),
            eta_piv: Vec::new(),
            eta_start: vec![0],
            eta_idx: Vec::new(),
            eta_val: Vec::new(),
            eta_by_pos: vec![Vec::new(); m],
        };
        let mut singular_positions = Vec::new();
        let mut wpos = vec![usize::MAX; m];
        let mut lbuf: Vec<(usize, f64)> = Vec::new();

        loop {
            let Some(&(cmin, cfirst)) = ccount.set.iter().next() else {
                break;
            };
            // Dependent column: nothing left to pivot on.
            if cmin == 0 {
                ccount.remove(cfirst);
                col_active[cfirst] = false;
                singular_positions.push(cfirst);
                continue;
            }

            let mut choice: Option<(usize, usize)> = None;

            if let Some(&(1, r)) = rcount.set.range((1, 0)..).next() {
                if let Some(j) = row_pat[r].iter().copied().find(|&j| col_active[j]) {
                    if let Some(&(_, v)) = cols[j].iter().find(|&&(i, _)| i == r) {
                        if v.abs() > PIVOT_ABS_TOL {
                            choice = Some((r, j));
                        }
                    }
                }
            }

            if choice.is_none() {
                let mut best: Option<(usize, f64, usize, usize)> = None;
                for &(cnt, j) in ccount.set.iter().take(SEARCH_COLUMNS) {
                    let colmax = cols[j].iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
                    if colmax <= PIVOT_ABS_TOL {
                        continue;
                    }
                    for &(i, v) in &cols[j] {
                        if v.abs() < THRESHOLD * colmax {
                            continue;
                        }
                        let cost = (rcount.counts[i] - 1) * (cnt - 1);
                        let better = match best {
                            None => true,
                            Some((bc, bv, _, _)) => cost < bc || (cost == bc && v.abs() > bv),
                        };
                        if better {
                            best = Some((cost, v.abs(), i, j));
                        }
                    }
                }
                match best {
                    Some((_, _, i, j)) => choice = Some((i, j)),
                    None => {
                        // Every candidate column is numerically empty.
                        let j = cfirst;
                        ccount.remove(j);
                        col_active[j] = false;
                        for &(i, _) in &cols[j] {
                            let c = rcount.counts[i] - 1;
                            rcount.change(i, c);
                        }
                        singular_positions.push(j);
                        continue;
                    }
                }
            }

            let (p, q) = choice.expect("pivot chosen");
            let piv = cols[q]
                .iter()
                .find(|&&(i, _)| i == p)
                .map(|&(_, v)| v)
                .expect("pivot entry present");

            // L column: multipliers for the other active rows of column q.
            lbuf.clear();
            for &(i, v) in &cols[q] {
                if i != p {
                    lbuf.push((i, v / piv));
                    let c = rcount.counts[i] - 1;
                    rcount.change(i, c);
                }
            }
            ccount.remove(q);
            col_active[q] = false;
            rcount.remove(p);
            row_active[p] = false;
            cols[q].clear();

            // U row: remaining entries of row p, then eliminate below.
            let pattern = std::mem::take(&mut row_pat[p]);
            for &j in &pattern {
                if !col_active[j] {
                    continue;
                }
                let Some(k) = cols[j].iter().position(|&(i, _)| i == p) else {
                    continue;
                };
                let (_, apj) = cols[j].swap_remove(k);
                lu.u_idx.push(j);
                lu.u_val.push(apj);
                let mut cnt = cols[j].len();
                if !lbuf.is_empty() {
                    for (k, &(i, _)) in cols[j].iter().enumerate() {
                        wpos[i] = k;
                    }
                    for &(i, l) in &lbuf {
                        let delta = -apj * l;
                        if wpos[i] != usize::MAX {
                            cols[j][wpos[i]].1 += delta;
                        } else {
                            wpos[i] = cols[j].len();
                            cols[j].push((i, delta));
                            row_pat[i].push(j);
                            let c = rcount.counts[i] + 1;
                            rcount.change(i, c);
                        }
                    }
                    for &(i, _) in &cols[j] {
                        wpos[i] = usize::MAX;
                    }
                    cnt = cols[j].len();
                }
                ccount.change(j, cnt);
            }

            for &(i, l) in &lbuf {
                lu.l_idx.push(i);
                lu.l_val.push(l);
            }
            lu.l_start.push(lu.l_idx.len());
            lu.u_start.push(lu.u_idx.len());
            lu.prow.push(p);
            lu.pcol.push(q);
            lu.diag.push(piv);
        }

        if singular_positions.is_empty() {
            lu.build_transposes();
            Ok(lu)
        } else {
            let rows: Vec<usize> = (0..m).filter(|&i| row_active[i]).collect();
            debug_assert_eq!(rows.len(), singular_positions.len());
            Err(Singular {
                positions: singular_positions,
                rows,
            })
        }
    }

    fn build_transposes(&mut self) {
        let m = self.m;
        let mut piv_of_pos = vec![0; m];
        let mut piv_of_row = vec![0; m];
        for k in 0..m {
            piv_of_pos[self.pcol[k]] = k;
            piv_of_row[self.prow[k]] = k;
        }
        let (start, piv, val) = transpose(m, &self.u_start, &self.u_idx, &self.u_val, &piv_of_pos);
        self.uc_start = start;
        self.uc_piv = piv;
        self.uc_val = val;
        let (start, piv, val) = transpose(m, &self.l_start, &self.l_idx, &self.l_val, &piv_of_row);
        self.lr_start = start;
        self.lr_piv = piv;
        self.lr_val = val;
    }

    pub fn num_etas(&self) -> usize {
        self.eta_pos.len()
    }

    /// Solves `B x = b`. `b` is indexed by row, the result by basis position.
    pub fn ftran(&self, b: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let v = b[self.prow[k]];
            if v != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    b[self.l_idx[e]] -= self.l_val[e] * v;
                }
            }
        }
        for j in (0..self.m).rev() {
            let xv = b[self.prow[j]] / self.diag[j];
            out[self.pcol[j]] = xv;
            if xv != 0.0 {
                for e in self.uc_start[j]..self.uc_start[j + 1] {
                    b[self.prow[self.uc_piv[e]]] -= self.uc_val[e] * xv;
                }
            }
        }
        for t in 0..self.eta_pos.len() {
            let r = self.eta_pos[t];
            let xr = out[r] / self.eta_piv[t];
            out[r] = xr;
            if xr != 0.0 {
                let range = self.eta_start[t]..self.eta_start[t + 1];
                for (&i, &v) in self.eta_idx[range.clone()].iter().zip(&self.eta_val[range]) {
                    out[i] -= v * xr;
                }
            }
        }
    }

    /// Solves `B^T y = c`. `c` is indexed by basis position, the result by row.
    pub fn btran(&self, c: &mut [f64], out: &mut [f64]) {
        // Axpy form over the transposed etas: acc[t] collects the dot product
        // of eta t with the current c, so zero entries of c cost nothing.
        let ne = self.eta_pos.len();
        if ne > 0 {
            let mut acc = vec![0.0; ne];
            for (i, &ci) in c.iter().enumerate() {
                if ci != 0.0 {
                    for &(t, v) in &self.eta_by_pos[i] {
                        acc[t as usize] += v * ci;
                    }
                }
            }
            for t in (0..ne).rev() {
                let r = self.eta_pos[t];
                let new = (c[r] - acc[t]) / self.eta_piv[t];
                let delta = new - c[r];
                c[r] = new;
                if delta != 0.0 {
                    for &(t2, v) in &self.eta_by_pos[r] {
                        if t2 as usize >= t {
                            break;
                        }
                        acc[t2 as usize] += v * delta;
                    }
                }
            }
        }
        for k in 0..self.m {
            let z = c[self.pcol[k]] / self.diag[k];
            out[self.prow[k]] = z;
            if z != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * z;
                }
            }
        }
        for k in (0..self.m).rev() {
            let w = out[self.prow[k]];
            if w != 0.0 {
                for e in self.lr_start[k]..self.lr_start[k + 1] {
                    out[self.prow[self.lr_piv[e]]] -= self.lr_val[e] * w;
                }
            }
        }
    }

    /// Records the replacement of basis position `r` by a column whose
    /// FTRAN image is `alpha` (indexed by position).
    pub fn push_eta(&mut self, r: usize, alpha: &[f64]) {
        let t = self.eta_pos.len();
        self.eta_pos.push(r);
        self.eta_piv.push(alpha[r]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a != 0.0 {
                self.eta_idx.push(i);
                self.eta_val.push(a);
                self.eta_by_pos[i].push((t as u32, a));
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

/// Regroups entries stored per source pivot (`start`/`idx`/`val`, with `idx`
/// mapped to a pivot index through `key`) into lists per target pivot that
/// record the source pivot.
fn transpose(
    m: usize,
    start: &[usize],
    idx: &[usize],
    val: &[f64],
    key: &[usize],
) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut out_start = vec![0usize; m + 1];
    for &i in idx {
        out_start[key[i] + 1] += 1;
    }
    for k in 0..m {
        out_start[k + 1] += out_start[k];
    }
    let mut fill = out_start.clone();
    let mut piv = vec![0; idx.len()];
    let mut vals = vec![0.0; idx.len()];
    for src in 0..m {
        for e in start[src]..start[src + 1] {
            let t = key[idx[e]];
            piv[fill[t]] = src;
            vals[fill[t]] = val[e];
            fill[t] += 1;
        }
    }
    (out_start, piv, vals)
}
