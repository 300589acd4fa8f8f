//! Bounded revised simplex with an explicit dense basis inverse.
//!
//! Every row `i` gets a logical column `s_i` with `a_i'x - s_i = 0` and the row
//! bounds moved onto `s_i`, so the working system is `[A | -I] z = 0` with
//! box bounds on every column. A dual phase is used whenever the starting
//! basis is dual feasible (always the case for nonnegative costs), otherwise a
//! composite primal phase 1/phase 2. Both phases switch to Bland's smallest
//! index rule after a run of degenerate pivots.

use super::LinearProgram;
use crate::error::{Error, Result};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free column held at zero.
    Free,
}

/// Status of every structural column followed by every row logical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub status: Vec<VarStatus>,
}

pub(crate) struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    status: Vec<VarStatus>,
    head: Vec<usize>,
    /// Row-major `m x m`; row `p` belongs to basic column `head[p]`.
    binv: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    pivots_since_refactor: usize,
    pub(crate) iterations: usize,
    max_iterations: usize,
}

enum Phase {
    Optimal,
    Infeasible,
    Unbounded,
}

impl Simplex {
    pub(crate) fn new(lp: &LinearProgram) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut counts = vec![0usize; n + 1];
        for r in &lp.rows {
            for &(j, _) in &r.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let nnz = counts[n];
        let mut fill = counts.clone();
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, r) in lp.rows.iter().enumerate() {
            for &(j, a) in &r.coeffs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }
        let mut cost = lp.cost.clone();
        cost.resize(n + m, 0.0);
        let mut lo = lp.lower.clone();
        let mut hi = lp.upper.clone();
        for r in &lp.rows {
            lo.push(r.lower);
            hi.push(r.upper);
        }
        let mut s = Simplex {
            m,
            n,
            col_start: counts,
            col_row,
            col_val,
            cost,
            lo,
            hi,
            status: vec![VarStatus::AtLower; n + m],
            head: Vec::new(),
            binv: Vec::new(),
            x: vec![0.0; n + m],
            y: vec![0.0; m],
            d: vec![0.0; n + m],
            pivots_since_refactor: 0,
            iterations: 0,
            max_iterations: 50 * (n + m) + 1000,
        };
        s.slack_basis();
        s
    }

    pub(crate) fn slack_basis(&mut self) {
        for j in 0..self.n {
            self.status[j] = self.nonbasic_default(j);
        }
        for i in 0..self.m {
            self.status[self.n + i] = VarStatus::Basic;
        }
        self.head = (self.n..self.n + self.m).collect();
        // B = -I.
        self.binv = vec![0.0; self.m * self.m];
        for i in 0..self.m {
            self.binv[i * self.m + i] = -1.0;
        }
        self.pivots_since_refactor = 0;
        self.recompute();
    }

    pub(crate) fn load_basis(&mut self, basis: &Basis) -> Result<()> {
        if basis.status.len() != self.n + self.m {
            return Err(Error::Dimension("basis length".into()));
        }
        let nbasic = basis.status.iter().filter(|s| **s == VarStatus::Basic).count();
        if nbasic != self.m {
            return Err(Error::Solver("basis has wrong number of basic columns".into()));
        }
        self.status = basis.status.clone();
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                self.status[j] = self.fit_nonbasic(j, self.status[j]);
            }
        }
        self.head = (0..self.n + self.m).filter(|&j| self.status[j] == VarStatus::Basic).collect();
        self.refactor()
    }

    pub(crate) fn basis(&self) -> Basis {
        Basis { status: self.status.clone() }
    }

    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.status[j] != VarStatus::Basic {
            self.status[j] = self.fit_nonbasic(j, self.status[j]);
            self.recompute_primal();
        }
    }

    pub(crate) fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    pub(crate) fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub(crate) fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn nonbasic_default(&self, j: usize) -> VarStatus {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        if lo.is_finite() && hi.is_finite() {
            if self.cost[j] < 0.0 {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            }
        } else if lo.is_finite() {
            VarStatus::AtLower
        } else if hi.is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn fit_nonbasic(&self, j: usize, want: VarStatus) -> VarStatus {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        match want {
            VarStatus::AtLower if lo.is_finite() => VarStatus::AtLower,
            VarStatus::AtUpper if hi.is_finite() => VarStatus::AtUpper,
            _ => {
                if lo.is_finite() {
                    VarStatus::AtLower
                } else if hi.is_finite() {
                    VarStatus::AtUpper
                } else {
                    VarStatus::Free
                }
            }
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => self.lo[j],
            VarStatus::AtUpper => self.hi[j],
            _ => 0.0,
        }
    }

    #[inline]
    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_row[k], self.col_val[k]);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    /// `rho . column j`
    #[inline]
    fn row_dot(&self, rho: &[f64], j: usize) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += rho[self.col_row[k]] * self.col_val[k];
            }
            s
        } else {
            -rho[j - self.n]
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        self.for_col(j, |i, a| {
            for (p, wp) in w.iter_mut().enumerate() {
                *wp += a * self.binv[p * m + i];
            }
        });
        w
    }

    /// Rebuilds the inverse of the basis matrix from `head`.
    ///
    /// Rows whose logical is basic contribute a trivial `-e_i` column, so only
    /// the block of basic structurals against the remaining rows is inverted.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let n = self.n;
        let mut row_has_basic_slack = vec![false; m];
        let mut structs = Vec::new();
        for &j in &self.head {
            if j >= n {
                row_has_basic_slack[j - n] = true;
            } else {
                structs.push(j);
            }
        }
        let open_rows: Vec<usize> = (0..m).filter(|&i| !row_has_basic_slack[i]).collect();
        let k = structs.len();
        if open_rows.len() != k {
            return Err(Error::Solver("basis dimension mismatch".into()));
        }
        let mut row_pos = vec![usize::MAX; m];
        for (p, &i) in open_rows.iter().enumerate() {
            row_pos[i] = p;
        }
        // Dense k x k block M[r][c] = A[open_rows[r], structs[c]], inverted by
        // Gauss-Jordan with partial pivoting.
        let mut a = vec![0.0; k * k];
        for (c, &j) in structs.iter().enumerate() {
            for idx in self.col_start[j]..self.col_start[j + 1] {
                let r = row_pos[self.col_row[idx]];
                if r != usize::MAX {
                    a[r * k + c] = self.col_val[idx];
                }
            }
        }
        let mut inv = vec![0.0; k * k];
        for i in 0..k {
            inv[i * k + i] = 1.0;
        }
        // Column permutation bookkeeping: pivot in column c may come from any row.
        let mut perm: Vec<usize> = (0..k).collect();
        for c in 0..k {
            let mut best = c;
            let mut best_abs = a[perm[c] * k + c].abs();
            for r in c + 1..k {
                let v = a[perm[r] * k + c].abs();
                if v > best_abs {
                    best_abs = v;
                    best = r;
                }
            }
            if best_abs < 1e-11 {
                return Err(Error::Solver("singular basis".into()));
            }
            perm.swap(c, best);
            let pr = perm[c];
            let piv = a[pr * k + c];
            let inv_piv = 1.0 / piv;
            for v in &mut a[pr * k..pr * k + k] {
                *v *= inv_piv;
            }
            for v in &mut inv[pr * k..pr * k + k] {
                *v *= inv_piv;
            }
            let prow_a: Vec<f64> = a[pr * k + c..pr * k + k].to_vec();
            let prow_i: Vec<f64> = inv[pr * k..pr * k + k].to_vec();
            for &r in perm.iter() {
                if r == pr {
                    continue;
                }
                let f = a[r * k + c];
                if f == 0.0 {
                    continue;
                }
                for (dst, src) in a[r * k + c..r * k + k].iter_mut().zip(&prow_a) {
                    *dst -= f * src;
                }
                for (dst, src) in inv[r * k..r * k + k].iter_mut().zip(&prow_i) {
                    if *src != 0.0 {
                        *dst -= f * src;
                    }
                }
            }
        }
        // After elimination, physical row perm[c] of `inv` holds row c of M^-1.
        // M^-1 maps open-row residuals to structural values in `structs` order.
        let mut binv = vec![0.0; m * m];
        let mut struct_rank = vec![usize::MAX; n];
        for (c, &j) in structs.iter().enumerate() {
            struct_rank[j] = c;
        }
        // For slack of row i (basic): s_i = A[i, S] x_S, so its B^-1 row is
        // A[i,S] M^-1 on open rows and -1 at column i.
        let minv_row = |c: usize| &inv[perm[c] * k..perm[c] * k + k];
        for (p, &j) in self.head.iter().enumerate() {
            if j < n {
                let c = struct_rank[j];
                let src = minv_row(c);
                for (q, &i) in open_rows.iter().enumerate() {
                    binv[p * m + i] = src[q];
                }
            } else {
                let i = j - n;
                binv[p * m + i] = -1.0;
            }
        }
        // Fill slack rows: accumulate A[i, S] * M^-1.
        let mut head_pos_of_slack = vec![usize::MAX; m];
        for (p, &j) in self.head.iter().enumerate() {
            if j >= n {
                head_pos_of_slack[j - n] = p;
            }
        }
        for (c, &j) in structs.iter().enumerate() {
            let src = minv_row(c).to_vec();
            for idx in self.col_start[j]..self.col_start[j + 1] {
                let i = self.col_row[idx];
                let p = head_pos_of_slack[i];
                if p == usize::MAX {
                    continue;
                }
                let a_ij = self.col_val[idx];
                for (q, &oi) in open_rows.iter().enumerate() {
                    binv[p * m + oi] += a_ij * src[q];
                }
            }
        }
        self.binv = binv;
        self.pivots_since_refactor = 0;
        self.recompute();
        Ok(())
    }

    fn recompute(&mut self) {
        self.recompute_primal();
        self.recompute_duals(None);
    }

    fn recompute_primal(&mut self) {
        let m = self.m;
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_col(j, |i, a| rhs[i] += a * xj);
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..p * m + m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            self.x[self.head[p]] = -v;
        }
    }

    /// Duals and reduced costs for `cost` (or the stored objective).
    fn recompute_duals(&mut self, cost: Option<&[f64]>) {
        let m = self.m;
        let c = cost.unwrap_or(&self.cost);
        let mut y = vec![0.0; m];
        for p in 0..m {
            let cb = c[self.head[p]];
            if cb != 0.0 {
                for (yi, b) in y.iter_mut().zip(&self.binv[p * m..p * m + m]) {
                    *yi += cb * b;
                }
            }
        }
        let mut d = vec![0.0; self.n + m];
        for j in 0..self.n + m {
            if self.status[j] != VarStatus::Basic {
                d[j] = c[j] - self.row_dot(&y, j);
            }
        }
        self.y = y;
        self.d = d;
    }

    fn pivot(&mut self, r: usize, q: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        let inv = 1.0 / piv;
        for v in &mut self.binv[r * m..r * m + m] {
            *v *= inv;
        }
        let prow: Vec<f64> = self.binv[r * m..r * m + m].to_vec();
        for (p, &wp) in w.iter().enumerate() {
            if p == r || wp == 0.0 {
                continue;
            }
            let row = &mut self.binv[p * m..p * m + m];
            for (dst, src) in row.iter_mut().zip(&prow) {
                *dst -= wp * src;
            }
        }
        self.head[r] = q;
        self.status[q] = VarStatus::Basic;
        self.pivots_since_refactor += 1;
    }

    fn maybe_refactor(&mut self) -> Result<()> {
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.hi[j] + PRIMAL_TOL {
            v - self.hi[j]
        } else {
            0.0
        }
    }

    fn is_dual_feasible(&self) -> bool {
        (0..self.n + self.m).all(|j| match self.status[j] {
            VarStatus::Basic => true,
            _ if self.lo[j] == self.hi[j] => true,
            VarStatus::AtLower => self.d[j] >= -DUAL_TOL,
            VarStatus::AtUpper => self.d[j] <= DUAL_TOL,
            VarStatus::Free => self.d[j].abs() <= DUAL_TOL,
        })
    }

    /// Moves boxed nonbasic columns to the bound their reduced cost prefers.
    fn flip_to_dual_feasible(&mut self) {
        let mut changed = false;
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic || !self.lo[j].is_finite() || !self.hi[j].is_finite() {
                continue;
            }
            let want = if self.d[j] < 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
            if self.status[j] != want && self.d[j].abs() > DUAL_TOL {
                self.status[j] = want;
                changed = true;
            }
        }
        if changed {
            self.recompute_primal();
        }
    }

    pub(crate) fn solve(&mut self) -> Result<()> {
        self.recompute();
        self.flip_to_dual_feasible();
        let outcome = if self.is_dual_feasible() {
            self.dual_phase()?
        } else {
            self.primal_phase()?
        };
        match outcome {
            Phase::Optimal => Ok(()),
            Phase::Infeasible => Err(Error::Infeasible),
            Phase::Unbounded => Err(Error::Unbounded),
        }
    }

    fn dual_phase(&mut self) -> Result<Phase> {
        let m = self.m;
        let mut degenerate = 0usize;
        let mut alpha = vec![0.0; self.n + m];
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::Solver("simplex iteration limit".into()));
            }
            self.maybe_refactor()?;
            let bland = degenerate >= DEGENERATE_RUN;

            // Leaving row: largest infeasibility, or smallest column index under Bland.
            let mut r = usize::MAX;
            let mut best = 0.0;
            for p in 0..m {
                let inf = self.primal_infeasibility(self.head[p]);
                if inf <= 0.0 {
                    continue;
                }
                let better = if bland {
                    r == usize::MAX || self.head[p] < self.head[r]
                } else {
                    inf > best
                };
                if better {
                    best = inf;
                    r = p;
                }
            }
            if r == usize::MAX {
                return Ok(Phase::Optimal);
            }
            let leave = self.head[r];
            let to_lower = self.x[leave] < self.lo[leave];
            let sigma = if to_lower { 1.0 } else { -1.0 };
            let target = if to_lower { self.lo[leave] } else { self.hi[leave] };

            let rho: Vec<f64> = self.binv[r * m..r * m + m].to_vec();
            // Harris two-pass ratio test on reduced costs.
            let mut bound = f64::INFINITY;
            for j in 0..self.n + m {
                alpha[j] = 0.0;
                if self.status[j] == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.row_dot(&rho, j);
                alpha[j] = a;
                if !self.dual_candidate(j, sigma * a) {
                    continue;
                }
                let ratio = (self.d[j].abs() + DUAL_TOL) / a.abs();
                if ratio < bound {
                    bound = ratio;
                }
            }
            if bound == f64::INFINITY {
                return Ok(Phase::Infeasible);
            }
            let mut q = usize::MAX;
            let mut q_key = (0.0f64, 0.0f64);
            for j in 0..self.n + m {
                let a = alpha[j];
                if a == 0.0 || !self.dual_candidate(j, sigma * a) {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                if ratio > bound {
                    continue;
                }
                if bland {
                    if q == usize::MAX {
                        q = j;
                    }
                } else if q == usize::MAX || a.abs() > q_key.0 {
                    q = j;
                    q_key = (a.abs(), ratio);
                }
            }
            let aq = alpha[q];
            let w = self.ftran(q);
            if (w[r] - aq).abs() > 1e-7 * (1.0 + aq.abs()) {
                // Inverse has drifted; rebuild and retry this iteration.
                self.refactor()?;
                continue;
            }
            let theta = (self.x[leave] - target) / w[r];
            let beta = self.d[q] / aq;
            if beta.abs() < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            // Primal update.
            for p in 0..m {
                self.x[self.head[p]] -= theta * w[p];
            }
            self.x[q] += theta;
            self.x[leave] = target;
            // Dual update.
            for j in 0..self.n + m {
                if alpha[j] != 0.0 {
                    self.d[j] -= beta * alpha[j];
                }
            }
            for (yi, rh) in self.y.iter_mut().zip(&rho) {
                *yi += beta * rh;
            }
            self.d[q] = 0.0;
            self.d[leave] = -beta;
            self.pivot(r, q, &w);
            self.status[leave] = if to_lower { VarStatus::AtLower } else { VarStatus::AtUpper };
            if self.lo[leave] == self.hi[leave] {
                self.status[leave] = VarStatus::AtLower;
            }
        }
    }

    /// Whether nonbasic `j` may enter when its reduced cost moves along
    /// `-sign(s) * t` for growing `t`, with `s = sigma * alpha_j`.
    #[inline]
    fn dual_candidate(&self, j: usize, s: f64) -> bool {
        if s.abs() <= PIVOT_TOL {
            return false;
        }
        match self.status[j] {
            VarStatus::AtLower => s < 0.0,
            VarStatus::AtUpper => s > 0.0,
            VarStatus::Free => true,
            VarStatus::Basic => false,
        }
    }

    fn primal_phase(&mut self) -> Result<Phase> {
        let m = self.m;
        let ntot = self.n + m;
        let mut degenerate = 0usize;
        let mut phase1_cost = vec![0.0; ntot];
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(Error::Solver("simplex iteration limit".into()));
            }
            self.maybe_refactor()?;
            let bland = degenerate >= DEGENERATE_RUN;

            let mut infeasible = false;
            for c in phase1_cost.iter_mut() {
                *c = 0.0;
            }
            for p in 0..m {
                let j = self.head[p];
                if self.x[j] < self.lo[j] - PRIMAL_TOL {
                    phase1_cost[j] = -1.0;
                    infeasible = true;
                } else if self.x[j] > self.hi[j] + PRIMAL_TOL {
                    phase1_cost[j] = 1.0;
                    infeasible = true;
                }
            }
            if infeasible {
                self.recompute_duals(Some(&phase1_cost));
            } else {
                self.recompute_duals(None);
            }

            // Pricing.
            let mut q = usize::MAX;
            let mut best = 0.0;
            for j in 0..ntot {
                if self.status[j] == VarStatus::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let dj = self.d[j];
                let improving = match self.status[j] {
                    VarStatus::AtLower => dj < -DUAL_TOL,
                    VarStatus::AtUpper => dj > DUAL_TOL,
                    VarStatus::Free => dj.abs() > DUAL_TOL,
                    VarStatus::Basic => false,
                };
                if !improving {
                    continue;
                }
                if bland {
                    q = j;
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    q = j;
                }
            }
            if q == usize::MAX {
                return Ok(if infeasible { Phase::Infeasible } else { Phase::Optimal });
            }
            let dir = if self.d[q] < 0.0 { 1.0 } else { -1.0 };
            let w = self.ftran(q);

            // Ratio test: basic p moves at rate -dir * w[p].
            let mut theta = self.hi[q] - self.lo[q];
            let mut r = usize::MAX;
            let mut r_to_lower = false;
            let mut r_abs = 0.0;
            for p in 0..m {
                let rate = -dir * w[p];
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.head[p];
                let v = self.x[j];
                let (limit, to_lower) = if rate < 0.0 {
                    if v > self.hi[j] + PRIMAL_TOL {
                        ((v - self.hi[j]) / -rate, false)
                    } else if v >= self.lo[j] - PRIMAL_TOL {
                        (((v - self.lo[j]).max(0.0)) / -rate, true)
                    } else {
                        continue;
                    }
                } else if v < self.lo[j] - PRIMAL_TOL {
                    ((self.lo[j] - v) / rate, true)
                } else if v <= self.hi[j] + PRIMAL_TOL {
                    (((self.hi[j] - v).max(0.0)) / rate, false)
                } else {
                    continue;
                };
                if !limit.is_finite() {
                    continue;
                }
                let take = if r == usize::MAX && limit <= theta {
                    true
                } else if limit < theta - 1e-12 {
                    true
                } else if (limit - theta).abs() <= 1e-12 && r != usize::MAX {
                    if bland {
                        j < self.head[r]
                    } else {
                        rate.abs() > r_abs
                    }
                } else {
                    false
                };
                if take {
                    theta = limit;
                    r = p;
                    r_to_lower = to_lower;
                    r_abs = rate.abs();
                }
            }
            if theta == f64::INFINITY {
                if infeasible {
                    return Err(Error::Solver("unbounded phase-1 ray".into()));
                }
                return Ok(Phase::Unbounded);
            }
            if theta < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for p in 0..m {
                self.x[self.head[p]] -= theta * dir * w[p];
            }
            self.x[q] += theta * dir;
            if r == usize::MAX {
                // Bound flip of the entering column.
                self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                self.x[q] = self.nonbasic_value(q);
                continue;
            }
            let leave = self.head[r];
            self.pivot(r, q, &w);
            self.status[leave] = if r_to_lower { VarStatus::AtLower } else { VarStatus::AtUpper };
            if self.lo[leave] == self.hi[leave] || !self.lo[leave].is_finite() && r_to_lower {
                self.status[leave] = self.fit_nonbasic(leave, self.status[leave]);
            }
            self.x[leave] = self.nonbasic_value(leave);
        }
    }

    /// Re-optimizes after bound changes, preferring the dual phase.
    pub(crate) fn resolve(&mut self) -> Result<()> {
        self.solve()
    }

    pub(crate) fn solution(&mut self, lp: &LinearProgram) -> super::LpSolution {
        self.recompute_duals(None);
        let x: Vec<f64> = self.x[..self.n].to_vec();
        super::LpSolution {
            objective: lp.objective(&x),
            x,
            duals: self.y.clone(),
            iterations: self.iterations,
            basis: self.basis(),
        }
    }

    pub(crate) fn num_structural(&self) -> usize {
        self.n
    }
}
