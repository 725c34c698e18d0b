//! Sparse LU factorization of simplex bases.
//!
//! Right-looking Gaussian elimination with a Markowitz-style pivot choice
//! (shortest active column, then shortest row among entries passing a
//! relative threshold). Basis matrices here are dominated by unit logical
//! columns, so fill-in stays small and a plain row-list representation is
//! enough.

/// Entries smaller than this are dropped during elimination.
const DROP_TOL: f64 = 1e-14;
/// Relative magnitude a pivot must have against the largest entry in its column.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Absolute magnitude below which a column is treated as dependent.
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    /// Row multipliers applied at each elimination step.
    lower: Vec<Vec<(usize, f64)>>,
    /// Off-diagonal entries of each pivot row, keyed by basis position.
    upper: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Singular {
    /// Basis positions that could not be pivoted.
    pub cols: Vec<usize>,
    /// Rows left without a pivot, same length as `cols`.
    pub rows: Vec<usize>,
}

impl LuFactors {
    /// Factorizes the `m × m` matrix whose columns are given as sparse
    /// `(row, value)` lists.
    pub(crate) fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut col_count = vec![0usize; m];
        for (c, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v.abs() > DROP_TOL {
                    rows[r].push((c, v));
                    col_rows[c].push(r);
                    col_count[c] += 1;
                }
            }
        }

        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut pos = vec![usize::MAX; m];
        let mut out = LuFactors {
            m,
            piv_row: Vec::with_capacity(m),
            piv_col: Vec::with_capacity(m),
            lower: Vec::with_capacity(m),
            upper: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
        };
        let mut failed_cols = Vec::new();

        for _ in 0..m {
            // Shortest remaining column.
            let mut best_col = usize::MAX;
            let mut best_count = usize::MAX;
            for c in 0..m {
                if !col_done[c] && col_count[c] < best_count {
                    best_count = col_count[c];
                    best_col = c;
                    if best_count <= 1 {
                        break;
                    }
                }
            }
            if best_col == usize::MAX {
                break;
            }
            let c = best_col;

            // Live entries of column c.
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(col_rows[c].len());
            col_rows[c].retain(|&r| !row_done[r]);
            col_rows[c].sort_unstable();
            col_rows[c].dedup();
            for &r in &col_rows[c] {
                if let Some(&(_, v)) = rows[r].iter().find(|&&(cc, _)| cc == c) {
                    entries.push((r, v));
                }
            }
            let max_abs = entries.iter().map(|e| e.1.abs()).fold(0.0, f64::max);
            if max_abs < SINGULAR_TOL {
                col_done[c] = true;
                failed_cols.push(c);
                for &(r, _) in &entries {
                    if let Some(i) = rows[r].iter().position(|&(cc, _)| cc == c) {
                        rows[r].swap_remove(i);
                    }
                }
                continue;
            }
            let (pr, pv) = entries
                .iter()
                .filter(|e| e.1.abs() >= PIVOT_THRESHOLD * max_abs)
                .min_by(|a, b| {
                    rows[a.0]
                        .len()
                        .cmp(&rows[b.0].len())
                        .then(b.1.abs().total_cmp(&a.1.abs()))
                        .then(a.0.cmp(&b.0))
                })
                .copied()
                .expect("threshold keeps the max entry");

            let prow: Vec<(usize, f64)> = rows[pr]
                .iter()
                .copied()
                .filter(|&(cc, _)| cc != c)
                .collect();
            let mut mults = Vec::new();
            for &(r, v) in &entries {
                if r == pr {
                    continue;
                }
                let mult = v / pv;
                mults.push((r, mult));
                let row = &mut rows[r];
                if let Some(i) = row.iter().position(|&(cc, _)| cc == c) {
                    row.swap_remove(i);
                }
                for (i, &(cc, _)) in row.iter().enumerate() {
                    pos[cc] = i;
                }
                for &(cc, pvv) in &prow {
                    let delta = -mult * pvv;
                    if pos[cc] != usize::MAX {
                        row[pos[cc]].1 += delta;
                    } else {
                        pos[cc] = row.len();
                        row.push((cc, delta));
                        col_rows[cc].push(r);
                        col_count[cc] += 1;
                    }
                }
                let mut i = 0;
                while i < row.len() {
                    let (cc, vv) = row[i];
                    if vv.abs() <= DROP_TOL {
                        col_count[cc] -= 1;
                        pos[cc] = usize::MAX;
                        row.swap_remove(i);
                    } else {
                        i += 1;
                    }
                }
                for &(cc, _) in row.iter() {
                    pos[cc] = usize::MAX;
                }
                col_count[c] -= 1;
            }
            for &(cc, _) in &prow {
                col_count[cc] -= 1;
            }
            col_count[c] = 0;
            row_done[pr] = true;
            col_done[c] = true;
            rows[pr].clear();

            out.piv_row.push(pr);
            out.piv_col.push(c);
            out.lower.push(mults);
            out.upper.push(prow);
            out.diag.push(pv);
        }

        if failed_cols.is_empty() {
            Ok(out)
        } else {
            let rows_left: Vec<usize> = (0..m).filter(|&r| !row_done[r]).collect();
            Err(Singular {
                cols: failed_cols,
                rows: rows_left,
            })
        }
    }

    /// Solves `B x = b`; `b` is indexed by row, the result by basis position.
    pub(crate) fn ftran(&self, b: &mut [f64]) -> Vec<f64> {
        for (k, mults) in self.lower.iter().enumerate() {
            let v = b[self.piv_row[k]];
            if v != 0.0 {
                for &(i, l) in mults {
                    b[i] -= l * v;
                }
            }
        }
        let mut x = vec![0.0; self.m];
        for k in (0..self.piv_row.len()).rev() {
            let mut s = b[self.piv_row[k]];
            for &(c, u) in &self.upper[k] {
                s -= u * x[c];
            }
            x[self.piv_col[k]] = s / self.diag[k];
        }
        x
    }

    /// Solves `Bᵀ y = e`; `e` is indexed by basis position, the result by row.
    pub(crate) fn btran(&self, e: &mut [f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for k in 0..self.piv_row.len() {
            let w = e[self.piv_col[k]] / self.diag[k];
            y[self.piv_row[k]] = w;
            if w != 0.0 {
                for &(c, u) in &self.upper[k] {
                    e[c] -= u * w;
                }
            }
        }
        for k in (0..self.piv_row.len()).rev() {
            let mut s = 0.0;
            for &(i, l) in &self.lower[k] {
                s += l * y[i];
            }
            if s != 0.0 {
                y[self.piv_row[k]] -= s;
            }
        }
        y
    }
}
