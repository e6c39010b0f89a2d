//! Sparse LU factorization of simplex bases.
//!
//! Left-looking (Gilbert-Peierls) elimination with threshold partial pivoting.
//! Columns are processed sparsest first and, among acceptable pivots, the row
//! with the fewest original nonzeros wins. Basis updates between
//! refactorizations are kept as a product-form eta file.

/// A sparse column: parallel row-index and value arrays.
#[derive(Clone, Debug, Default)]
pub struct SparseCol {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseCol {
    pub fn push(&mut self, i: usize, v: f64) {
        self.idx.push(i);
        self.val.push(v);
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }
}

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;

/// Returned when the basis matrix is numerically singular. `missing_rows` are
/// rows that never received a pivot, `dependent_cols` the basis positions that
/// could not be pivoted.
#[derive(Debug)]
pub struct Singular {
    pub dependent_cols: Vec<usize>,
    pub missing_rows: Vec<usize>,
}

#[derive(Clone, Debug)]
struct Eta {
    pos: usize,
    pivot: f64,
    col: SparseCol,
}

#[derive(Clone, Debug)]
pub struct LuFactors {
    m: usize,
    // step k pivots on row `pivot_row[k]` using basis position `col_of_step[k]`
    pivot_row: Vec<usize>,
    step_of_row: Vec<usize>,
    col_of_step: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
    work: Vec<f64>,
}

const UNSET: usize = usize::MAX;

impl LuFactors {
    /// Factor the `m x m` matrix whose columns are `cols` (basis position order).
    pub fn factor(m: usize, cols: &[SparseCol]) -> Result<LuFactors, Singular> {
        assert_eq!(cols.len(), m);
        let mut row_count = vec![0usize; m];
        for c in cols {
            for &i in &c.idx {
                row_count[i] += 1;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&j| (cols[j].nnz(), j));

        let mut f = LuFactors {
            m,
            pivot_row: Vec::with_capacity(m),
            step_of_row: vec![UNSET; m],
            col_of_step: Vec::with_capacity(m),
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            etas: Vec::new(),
            eta_nnz: 0,
            work: vec![0.0; m],
        };

        let mut x = vec![0.0f64; m];
        let mut visited = vec![false; m];
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut dependent = Vec::new();

        for &j in &order {
            let col = &cols[j];
            // Symbolic: rows reachable through already-pivoted rows.
            topo.clear();
            for &i0 in &col.idx {
                if visited[i0] {
                    continue;
                }
                visited[i0] = true;
                stack.push((i0, 0));
                while let Some(top) = stack.len().checked_sub(1) {
                    let (row, child) = stack[top];
                    let step = f.step_of_row[row];
                    if step != UNSET {
                        let (s, e) = (f.l_start[step], f.l_start[step + 1]);
                        if s + child < e {
                            let next = f.l_idx[s + child];
                            stack[top].1 += 1;
                            if !visited[next] {
                                visited[next] = true;
                                stack.push((next, 0));
                            }
                            continue;
                        }
                    }
                    topo.push(row);
                    stack.pop();
                }
            }
            // Numeric: x = L^{-1} col, processing pivoted rows in topological order.
            for (&i, &v) in col.idx.iter().zip(&col.val) {
                x[i] += v;
            }
            for &row in topo.iter().rev() {
                let step = f.step_of_row[row];
                if step == UNSET {
                    continue;
                }
                let xr = x[row];
                if xr == 0.0 {
                    continue;
                }
                for p in f.l_start[step]..f.l_start[step + 1] {
                    x[f.l_idx[p]] -= f.l_val[p] * xr;
                }
            }
            // Pivot selection among unpivoted rows.
            let mut max_abs = 0.0f64;
            for &row in &topo {
                if f.step_of_row[row] == UNSET {
                    max_abs = max_abs.max(x[row].abs());
                }
            }
            let mut pivot = UNSET;
            if max_abs > SINGULAR_TOL {
                let mut best_key = (usize::MAX, 0.0f64);
                for &row in &topo {
                    if f.step_of_row[row] != UNSET {
                        continue;
                    }
                    let a = x[row].abs();
                    if a < PIVOT_THRESHOLD * max_abs {
                        continue;
                    }
                    let count = row_count[row];
                    let better = pivot == UNSET
                        || count < best_key.0
                        || (count == best_key.0 && (a > best_key.1 || (a == best_key.1 && row < pivot)));
                    if better {
                        best_key = (count, a);
                        pivot = row;
                    }
                }
            }
            if pivot == UNSET {
                dependent.push(j);
                for &row in &topo {
                    x[row] = 0.0;
                    visited[row] = false;
                }
                continue;
            }
            let k = f.pivot_row.len();
            let d = x[pivot];
            for &row in &topo {
                let v = x[row];
                let step = f.step_of_row[row];
                if step != UNSET {
                    if v != 0.0 {
                        f.u_idx.push(step);
                        f.u_val.push(v);
                    }
                } else if row != pivot && v != 0.0 {
                    f.l_idx.push(row);
                    f.l_val.push(v / d);
                }
                x[row] = 0.0;
                visited[row] = false;
            }
            f.u_start.push(f.u_idx.len());
            f.l_start.push(f.l_idx.len());
            f.u_diag.push(d);
            f.pivot_row.push(pivot);
            f.col_of_step.push(j);
            f.step_of_row[pivot] = k;
        }

        if !dependent.is_empty() {
            let missing_rows = (0..m).filter(|&i| f.step_of_row[i] == UNSET).collect();
            return Err(Singular {
                dependent_cols: dependent,
                missing_rows,
            });
        }
        Ok(f)
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    /// Solve `B z = b` in place. On entry `b` is indexed by row, on exit `z` is
    /// indexed by basis position.
    pub fn ftran(&mut self, b: &mut [f64]) {
        let m = self.m;
        // L solve (row-indexed)
        for k in 0..m {
            let r = self.pivot_row[k];
            let v = b[r];
            if v == 0.0 {
                continue;
            }
            for p in self.l_start[k]..self.l_start[k + 1] {
                b[self.l_idx[p]] -= self.l_val[p] * v;
            }
        }
        // gather into step order
        let w = &mut self.work;
        for k in 0..m {
            w[k] = b[self.pivot_row[k]];
        }
        // U solve (step-indexed, column oriented)
        for k in (0..m).rev() {
            let v = w[k];
            if v == 0.0 {
                continue;
            }
            let v = v / self.u_diag[k];
            w[k] = v;
            for p in self.u_start[k]..self.u_start[k + 1] {
                w[self.u_idx[p]] -= self.u_val[p] * v;
            }
        }
        for k in 0..m {
            b[self.col_of_step[k]] = w[k];
        }
        for eta in &self.etas {
            let zr = b[eta.pos];
            if zr == 0.0 {
                continue;
            }
            let zr = zr / eta.pivot;
            b[eta.pos] = zr;
            for (&i, &a) in eta.col.idx.iter().zip(&eta.col.val) {
                b[i] -= a * zr;
            }
        }
    }

    /// Solve `B^T y = c` in place. On entry `c` is indexed by basis position,
    /// on exit `y` is indexed by row.
    pub fn btran(&mut self, c: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for (&i, &a) in eta.col.idx.iter().zip(&eta.col.val) {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let w = &mut self.work;
        for k in 0..m {
            w[k] = c[self.col_of_step[k]];
        }
        // U^T solve: forward over steps
        for k in 0..m {
            let mut s = w[k];
            for p in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[p] * w[self.u_idx[p]];
            }
            w[k] = s / self.u_diag[k];
        }
        // L^T solve: backward over steps, result indexed by row
        for k in (0..m).rev() {
            let mut s = w[k];
            for p in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[p] * c[self.l_idx[p]];
            }
            c[self.pivot_row[k]] = s;
        }
    }

    /// Record the replacement of basis position `pos` by a column whose
    /// FTRAN image (position-indexed, dense) is `alpha`.
    pub fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let mut col = SparseCol::default();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a != 0.0 {
                col.push(i, a);
            }
        }
        self.eta_nnz += col.nnz();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            col,
        });
    }
}
