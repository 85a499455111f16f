//! Bounded-variable primal revised simplex with an explicit dense basis
//! inverse.
//!
//! Every row `i` gets a logical variable `r_i = a_i x` whose bounds encode the
//! row sense, so the working system is `[A | -I] (x, r) = 0` with bounds on
//! all columns. Phase I adds one artificial per row that the starting point
//! violates and minimises their sum. Pricing is Dantzig with a Harris ratio
//! test; long runs of degenerate pivots switch to Bland's rule until the
//! objective moves again.

use crate::error::{Error, Result};
use crate::milp::{MilpModel, Sense};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 128;
const DEGENERATE_RUN_FOR_BLAND: usize = 50;
const MAX_REFACTOR_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Primal values of the model variables (meaningful when optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers `y` with `c - A'y` the reduced costs, one per model
    /// constraint. Rows folded into bounds report 0.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

/// Column-major copy of a model's constraint matrix, reusable across solves
/// that differ only in variable bounds.
#[derive(Debug, Clone)]
pub struct LpData {
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
    /// Model constraint index of each kept row.
    row_origin: Vec<usize>,
    n_model_rows: usize,
    cost: Vec<f64>,
    offset: f64,
    /// Bounds implied by single-variable rows.
    implied_lo: Vec<f64>,
    implied_hi: Vec<f64>,
    /// A row without terms that cannot be satisfied.
    empty_row_infeasible: bool,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpData {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let mut implied_lo = vec![f64::NEG_INFINITY; n];
        let mut implied_hi = vec![f64::INFINITY; n];
        let mut empty_row_infeasible = false;
        let mut rows: Vec<(usize, Vec<(usize, f64)>, f64, f64)> = Vec::new();
        for (ci, c) in model.constraints.iter().enumerate() {
            let mut terms: Vec<(usize, f64)> = Vec::with_capacity(c.terms.len());
            for &(v, a) in &c.terms {
                if a == 0.0 {
                    continue;
                }
                match terms.iter_mut().find(|(j, _)| *j == v.0) {
                    Some(t) => t.1 += a,
                    None => terms.push((v.0, a)),
                }
            }
            terms.retain(|&(_, a)| a != 0.0);
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            match terms.as_slice() {
                [] => {
                    if lo > FEAS_TOL || hi < -FEAS_TOL {
                        empty_row_infeasible = true;
                    }
                }
                [(j, a)] => {
                    let (l, h) = if *a > 0.0 { (lo / a, hi / a) } else { (hi / a, lo / a) };
                    implied_lo[*j] = implied_lo[*j].max(l);
                    implied_hi[*j] = implied_hi[*j].min(h);
                }
                _ => rows.push((ci, terms, lo, hi)),
            }
        }
        let m = rows.len();
        let mut counts = vec![0usize; n];
        for (_, terms, _, _) in &rows {
            for &(j, _) in terms {
                counts[j] += 1;
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start.clone();
        let mut row_lo = Vec::with_capacity(m);
        let mut row_hi = Vec::with_capacity(m);
        let mut row_origin = Vec::with_capacity(m);
        for (i, (ci, terms, lo, hi)) in rows.into_iter().enumerate() {
            for (j, a) in terms {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
            row_lo.push(lo);
            row_hi.push(hi);
            row_origin.push(ci);
        }
        let mut cost = vec![0.0; n];
        for &(v, c) in &model.objective {
            cost[v.0] += c;
        }
        Self {
            n,
            col_start,
            col_row,
            col_val,
            row_lo,
            row_hi,
            row_origin,
            n_model_rows: model.num_constraints(),
            cost,
            offset: model.objective_offset,
            implied_lo,
            implied_hi,
            empty_row_infeasible,
            lower: model.variables.iter().map(|v| v.lower).collect(),
            upper: model.variables.iter().map(|v| v.upper).collect(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.row_lo.len()
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    /// Solve with the model's own bounds.
    pub fn solve_default(&self) -> Result<LpResult> {
        self.solve(&self.lower, &self.upper)
    }

    /// Solve with the given variable bounds (intersected with any bounds
    /// implied by single-variable rows).
    pub fn solve(&self, lower: &[f64], upper: &[f64]) -> Result<LpResult> {
        assert_eq!(lower.len(), self.n);
        assert_eq!(upper.len(), self.n);
        let lo: Vec<f64> = lower.iter().zip(&self.implied_lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = upper.iter().zip(&self.implied_hi).map(|(a, b)| a.min(*b)).collect();
        let infeasible = LpResult {
            status: LpStatus::Infeasible,
            x: vec![0.0; self.n],
            objective: f64::INFINITY,
            duals: vec![0.0; self.n_model_rows],
            iterations: 0,
        };
        if self.empty_row_infeasible || lo.iter().zip(&hi).any(|(l, h)| *l > *h + FEAS_TOL) {
            return Ok(infeasible);
        }
        let hi: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| h.max(*l)).collect();

        let mut last_err = None;
        for attempt in 0..MAX_REFACTOR_RETRIES {
            let refactor_every = REFACTOR_EVERY >> attempt;
            let mut s = Simplex::new(self, &lo, &hi, refactor_every);
            match s.run() {
                Ok(status) => return Ok(s.result(status)),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

/// Solve the LP relaxation of `model`.
pub fn solve_lp(model: &MilpModel) -> Result<LpResult> {
    model.validate()?;
    LpData::from_model(model).solve_default()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free column resting at zero.
    Zero,
}

struct Simplex<'a> {
    lp: &'a LpData,
    m: usize,
    /// Structural, then logical, then artificial columns.
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    /// Sign of each artificial column (`+e_i` or `-e_i`), indexed by row.
    art_sign: Vec<f64>,
    art_row: Vec<usize>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    cost: Vec<f64>,
    iterations: usize,
    pivots_since_refactor: usize,
    refactor_every: usize,
    iteration_limit: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LpData, lo_s: &[f64], hi_s: &[f64], refactor_every: usize) -> Self {
        let n = lp.n;
        let m = lp.num_rows();
        let mut lo = lo_s.to_vec();
        let mut hi = hi_s.to_vec();
        lo.extend(&lp.row_lo);
        hi.extend(&lp.row_hi);
        let mut x = vec![0.0; n + m];
        let mut state = vec![State::Lower; n + m];
        for j in 0..n {
            let (v, st) = if lo[j].is_finite() {
                (lo[j], State::Lower)
            } else if hi[j].is_finite() {
                (hi[j], State::Upper)
            } else {
                (0.0, State::Zero)
            };
            x[j] = v;
            state[j] = st;
        }
        let mut activity = vec![0.0; m];
        for j in 0..n {
            if x[j] != 0.0 {
                for k in lp.col_start[j]..lp.col_start[j + 1] {
                    activity[lp.col_row[k]] += lp.col_val[k] * x[j];
                }
            }
        }
        let mut basis = Vec::with_capacity(m);
        let mut art_sign = Vec::new();
        let mut art_row = Vec::new();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let r = n + i;
            let a = activity[i];
            let target = if a < lo[r] - FEAS_TOL {
                Some((lo[r], State::Lower, 1.0))
            } else if a > hi[r] + FEAS_TOL {
                Some((hi[r], State::Upper, -1.0))
            } else {
                None
            };
            match target {
                None => {
                    x[r] = a;
                    state[r] = State::Basic;
                    basis.push(r);
                    binv[i * m + i] = -1.0;
                }
                Some((bound, st, sign)) => {
                    x[r] = bound;
                    state[r] = st;
                    let col = n + m + art_row.len();
                    art_sign.push(sign);
                    art_row.push(i);
                    // sign * art = bound - activity >= 0
                    x.push((bound - a) * sign);
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                    state.push(State::Basic);
                    basis.push(col);
                    binv[i * m + i] = sign;
                }
            }
        }
        let total = x.len();
        Self {
            lp,
            m,
            lo,
            hi,
            x,
            state,
            art_sign,
            art_row,
            basis,
            binv,
            cost: vec![0.0; total],
            iterations: 0,
            pivots_since_refactor: 0,
            refactor_every,
            iteration_limit: 50 * (total + m) + 10_000,
        }
    }

    fn n(&self) -> usize {
        self.lp.n
    }

    fn n_arts(&self) -> usize {
        self.art_row.len()
    }

    /// Visit the nonzeros of column `j` as `(row, value)`.
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        let n = self.n();
        if j < n {
            for k in self.lp.col_start[j]..self.lp.col_start[j + 1] {
                f(self.lp.col_row[k], self.lp.col_val[k]);
            }
        } else if j < n + self.m {
            f(j - n, -1.0);
        } else {
            let a = j - n - self.m;
            f(self.art_row[a], self.art_sign[a]);
        }
    }

    fn run(&mut self) -> Result<LpStatus> {
        if self.n_arts() > 0 {
            let first_art = self.n() + self.m;
            for j in first_art..self.x.len() {
                self.cost[j] = 1.0;
            }
            self.iterate(true)?;
            let infeas: f64 = self.x[first_art..].iter().sum();
            if infeas > FEAS_TOL * (1 + self.n_arts()) as f64 {
                return Ok(LpStatus::Infeasible);
            }
            for j in first_art..self.x.len() {
                self.cost[j] = 0.0;
                self.hi[j] = 0.0;
                if self.state[j] != State::Basic {
                    self.x[j] = 0.0;
                    self.state[j] = State::Lower;
                }
            }
        }
        for j in 0..self.n() {
            self.cost[j] = self.lp.cost[j];
        }
        self.iterate(false)
    }

    /// `y' = c_B' B^-1`.
    fn compute_duals(&self) -> Vec<f64> {
        let m = self.m;
        let cb: Vec<f64> = self.basis.iter().map(|&b| self.cost[b]).collect();
        (0..m)
            .map(|k| {
                let col = &self.binv[k * m..(k + 1) * m];
                col.iter().zip(&cb).map(|(a, c)| a * c).sum()
            })
            .collect()
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        self.for_col(j, |i, a| d -= y[i] * a);
        d
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.hi[j] - self.lo[j] <= 0.0
    }

    /// Direction (+1 increase / -1 decrease) if column `j` improves.
    fn improving(&self, j: usize, d: f64) -> Option<f64> {
        match self.state[j] {
            State::Basic => None,
            _ if self.is_fixed(j) => None,
            State::Lower => (d < -OPT_TOL).then_some(1.0),
            State::Upper => (d > OPT_TOL).then_some(-1.0),
            State::Zero => {
                if d < -OPT_TOL {
                    Some(1.0)
                } else if d > OPT_TOL {
                    Some(-1.0)
                } else {
                    None
                }
            }
        }
    }

    fn iterate(&mut self, phase_one: bool) -> Result<LpStatus> {
        let mut degenerate_run = 0usize;
        let total = self.x.len();
        let mut y = self.compute_duals();
        loop {
            if self.iterations > self.iteration_limit {
                return Err(Error::Numerical(format!(
                    "iteration limit {} reached",
                    self.iteration_limit
                )));
            }
            if self.pivots_since_refactor >= self.refactor_every {
                self.refactor()?;
                y = self.compute_duals();
            }
            let bland = degenerate_run >= DEGENERATE_RUN_FOR_BLAND;

            let mut entering: Option<(usize, f64, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                if self.state[j] == State::Basic {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                if let Some(dir) = self.improving(j, d) {
                    if bland {
                        entering = Some((j, dir, d));
                        break;
                    }
                    if d.abs() > best {
                        best = d.abs();
                        entering = Some((j, dir, d));
                    }
                }
            }
            let Some((q, dir, d_q)) = entering else {
                // Confirm against freshly computed duals before declaring optimality.
                let fresh = self.compute_duals();
                let drift = fresh.iter().zip(&y).any(|(a, b)| (a - b).abs() > OPT_TOL);
                if drift {
                    y = fresh;
                    continue;
                }
                return Ok(LpStatus::Optimal);
            };

            let alpha = self.ftran(q);
            let (step, leave) = self.ratio_test(&alpha, dir, bland);
            let flip = self.hi[q] - self.lo[q];
            let (theta, leaving) = match leave {
                Some((theta, r)) if theta < flip => (theta, Some(r)),
                _ if flip.is_finite() => (flip, None),
                Some((theta, r)) => (theta, Some(r)),
                None => {
                    if phase_one {
                        return Err(Error::Numerical("phase one appears unbounded".into()));
                    }
                    return Ok(LpStatus::Unbounded);
                }
            };
            let _ = step;
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            self.x[q] += dir * theta;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * dir * theta;
                }
            }
            match leaving {
                None => {
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    let rate = -alpha[r] * dir;
                    if rate < 0.0 {
                        self.x[out] = self.lo[out];
                        self.state[out] = State::Lower;
                    } else {
                        self.x[out] = self.hi[out];
                        self.state[out] = State::Upper;
                    }
                    self.state[q] = State::Basic;
                    self.basis[r] = q;
                    // y += (d_q / alpha_r) * (row r of the old inverse)
                    let f = d_q / alpha[r];
                    let m = self.m;
                    for (k, yk) in y.iter_mut().enumerate() {
                        *yk += f * self.binv[k * m + r];
                    }
                    self.pivot(r, &alpha);
                }
            }
        }
    }

    /// `B^-1 a_q`.
    fn ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        let binv = &self.binv;
        self.for_col(q, |k, v| {
            for (a, b) in alpha.iter_mut().zip(&binv[k * m..(k + 1) * m]) {
                *a += b * v;
            }
        });
        for a in &mut alpha {
            if a.abs() < 1e-13 {
                *a = 0.0;
            }
        }
        alpha
    }

    /// Harris two-pass ratio test. Returns the step and leaving row.
    fn ratio_test(&self, alpha: &[f64], dir: f64, bland: bool) -> (f64, Option<(f64, usize)>) {
        let mut relaxed = f64::INFINITY;
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let rate = -a * dir;
            let lim = if rate < 0.0 {
                (self.x[b] - self.lo[b] + FEAS_TOL) / -rate
            } else {
                (self.hi[b] - self.x[b] + FEAS_TOL) / rate
            };
            relaxed = relaxed.min(lim);
        }
        if relaxed == f64::INFINITY {
            return (f64::INFINITY, None);
        }
        let mut chosen: Option<(f64, usize)> = None;
        let mut chosen_key = (0.0f64, usize::MAX);
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let rate = -a * dir;
            let lim = if rate < 0.0 {
                (self.x[b] - self.lo[b]) / -rate
            } else {
                (self.hi[b] - self.x[b]) / rate
            };
            if lim > relaxed {
                continue;
            }
            let better = if bland {
                b < chosen_key.1
            } else {
                a.abs() > chosen_key.0
            };
            if better {
                chosen_key = (a.abs(), b);
                chosen = Some((lim.max(0.0), i));
            }
        }
        (relaxed, chosen)
    }

    /// Product-form update of the column-major inverse.
    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let inv = 1.0 / alpha[r];
        let nz: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != r && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        for col in self.binv.chunks_exact_mut(m) {
            let p = col[r];
            if p == 0.0 {
                continue;
            }
            let p = p * inv;
            col[r] = p;
            for &(i, a) in &nz {
                col[i] -= a * p;
            }
        }
        self.pivots_since_refactor += 1;
    }

    /// Rebuild `B^-1` from scratch and recompute basic values.
    ///
    /// Logical and artificial columns are signed unit vectors, so only the
    /// block of structural columns restricted to the rows those unit columns
    /// leave uncovered needs a dense inverse.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let n = self.n();
        self.pivots_since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        let singular = || Error::Numerical("singular basis during refactorization".into());
        // unit[c] = (row, sign) for unit basis columns
        let mut unit: Vec<Option<(usize, f64)>> = vec![None; m];
        let mut covered = vec![false; m];
        let mut structural = Vec::new();
        for (c, &j) in self.basis.iter().enumerate() {
            if j < n {
                structural.push(c);
                continue;
            }
            let (row, sign) = if j < n + m {
                (j - n, -1.0)
            } else {
                let a = j - n - m;
                (self.art_row[a], self.art_sign[a])
            };
            if covered[row] {
                return Err(singular());
            }
            covered[row] = true;
            unit[c] = Some((row, sign));
        }
        let free_rows: Vec<usize> = (0..m).filter(|&i| !covered[i]).collect();
        let k = structural.len();
        if free_rows.len() != k {
            return Err(singular());
        }
        let mut row_pos = vec![usize::MAX; m];
        for (p, &i) in free_rows.iter().enumerate() {
            row_pos[i] = p;
        }
        // Dense A_RK (row-major) and its inverse by Gauss-Jordan.
        let mut a = vec![0.0; k * k];
        for (kc, &c) in structural.iter().enumerate() {
            self.for_col(self.basis[c], |i, v| {
                if row_pos[i] != usize::MAX {
                    a[row_pos[i] * k + kc] = v;
                }
            });
        }
        let mut inv = vec![0.0; k * k];
        for i in 0..k {
            inv[i * k + i] = 1.0;
        }
        let mut perm: Vec<usize> = (0..k).collect();
        for col in 0..k {
            let mut p = col;
            let mut best = a[perm[col] * k + col].abs();
            for q in col + 1..k {
                let v = a[perm[q] * k + col].abs();
                if v > best {
                    best = v;
                    p = q;
                }
            }
            if best < 1e-11 {
                return Err(singular());
            }
            perm.swap(col, p);
            let pr = perm[col];
            let pivot = a[pr * k + col];
            for c in 0..k {
                a[pr * k + c] /= pivot;
                inv[pr * k + c] /= pivot;
            }
            for q in 0..k {
                let r = perm[q];
                if r == pr {
                    continue;
                }
                let f = a[r * k + col];
                if f == 0.0 {
                    continue;
                }
                for c in col..k {
                    a[r * k + c] -= f * a[pr * k + c];
                }
                for c in 0..k {
                    inv[r * k + c] -= f * inv[pr * k + c];
                }
            }
        }
        // Row kc of A_RK^-1 is row perm[kc] of `inv`, over the free rows.
        let mut binv = vec![0.0; m * m];
        for (kc, &c) in structural.iter().enumerate() {
            let row = &inv[perm[kc] * k..(perm[kc] + 1) * k];
            for (p, &v) in row.iter().enumerate() {
                binv[free_rows[p] * m + c] = v;
            }
        }
        // Unit position c on row u: (e_u - A_{u,K} A_RK^-1) / sign
        let mut coupling: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (kc, &c) in structural.iter().enumerate() {
            self.for_col(self.basis[c], |i, v| {
                if covered[i] {
                    coupling[i].push((kc, v));
                }
            });
        }
        for (c, u) in unit.iter().enumerate() {
            let Some((row, sign)) = *u else { continue };
            binv[row * m + c] = 1.0 / sign;
            for &(kc, v) in &coupling[row] {
                let inv_row = &inv[perm[kc] * k..(perm[kc] + 1) * k];
                for (p, &w) in inv_row.iter().enumerate() {
                    if w != 0.0 {
                        binv[free_rows[p] * m + c] -= v * w / sign;
                    }
                }
            }
        }
        self.binv = binv;
        self.recompute_basics();
        Ok(())
    }

    /// Basic values from the nonbasic ones: `x_B = -B^-1 N x_N`.
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.x.len() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_col(j, |i, v| rhs[i] -= v * xj);
            }
        }
        let mut xb = vec![0.0; m];
        for (k, &r) in rhs.iter().enumerate() {
            if r != 0.0 {
                for (x, b) in xb.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *x += b * r;
                }
            }
        }
        for (i, v) in xb.into_iter().enumerate() {
            self.x[self.basis[i]] = v;
        }
    }

    fn result(&mut self, status: LpStatus) -> LpResult {
        let n = self.n();
        if status == LpStatus::Optimal && self.pivots_since_refactor > 0 {
            self.recompute_basics();
        }
        let mut x: Vec<f64> = self.x[..n].to_vec();
        for (j, v) in x.iter_mut().enumerate() {
            if *v < self.lo[j] && *v > self.lo[j] - FEAS_TOL {
                *v = self.lo[j];
            }
            if *v > self.hi[j] && *v < self.hi[j] + FEAS_TOL {
                *v = self.hi[j];
            }
        }
        let mut duals = vec![0.0; self.lp.n_model_rows];
        if status == LpStatus::Optimal {
            let y = self.compute_duals();
            for (i, &ci) in self.lp.row_origin.iter().enumerate() {
                duals[ci] = y[i];
            }
        }
        let objective = match status {
            LpStatus::Optimal => {
                self.lp.offset + x.iter().zip(&self.lp.cost).map(|(a, b)| a * b).sum::<f64>()
            }
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        LpResult {
            status,
            x,
            objective,
            duals,
            iterations: self.iterations,
        }
    }
}
