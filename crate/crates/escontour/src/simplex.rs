//! Dense bounded-variable two-phase revised simplex.
//!
//! Geared to problems with few rows and many columns (the scenario form of
//! the ES program has N+1 rows and T+1 columns): the basis inverse is kept
//! explicitly and updated in product form, with periodic refactorization.
//! Pricing is Dantzig's rule, falling back to Bland's rule after a run of
//! degenerate steps so cycling cannot occur.

#![allow(clippy::needless_range_loop)] // indexed loops mirror the dense linear algebra

use crate::error::{Error, Result};

const TOL_REDUCED: f64 = 1e-9;
const TOL_PIVOT: f64 = 1e-10;
const TOL_STEP_DEGEN: f64 = 1e-12;
const DEGEN_STREAK_FOR_BLAND: usize = 40;
const REFACTOR_EVERY: usize = 128;

/// A linear program in computational form:
/// minimize `cost . x` subject to `a x = b`, `lower <= x <= upper`
/// (infinite bounds allowed). `a` is column-major, `rows x cols`.
///
/// `start_upper` lists columns that begin at their upper bound instead of
/// the lower one; a crash start close to the expected active set cuts the
/// degenerate phase-1 churn dramatically.
#[derive(Debug, Clone)]
pub struct Lp {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub start_upper: Vec<usize>,
}

/// Result of a solve. `feasible = false` means phase 1 could not zero the
/// artificial variables, i.e. the constraint system has no solution within
/// the bounds.
#[derive(Debug, Clone)]
pub struct Solution {
    pub feasible: bool,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Free variable resting at zero until it enters the basis.
    FreeAtZero,
}

struct Worker<'a> {
    lp: &'a Lp,
    m: usize,
    /// number of structural columns
    n: usize,
    /// total columns including the m artificials appended at the end
    nt: usize,
    /// sign of the artificial column for each row (+- e_row)
    art_sign: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    cost: Vec<f64>,
    iterations: usize,
    w: Vec<f64>,
    duals: Vec<f64>,
}

impl<'a> Worker<'a> {
    fn new(lp: &'a Lp) -> Self {
        let m = lp.rows;
        let n = lp.cols;
        let nt = n + m;
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut state = Vec::with_capacity(nt);
        let mut x = Vec::with_capacity(nt);
        for j in 0..n {
            // start bounded variables at the finite bound nearest zero,
            // free variables at zero
            let (lo, up) = (lower[j], upper[j]);
            if lo.is_finite() {
                state.push(VarState::AtLower);
                x.push(lo);
            } else if up.is_finite() {
                state.push(VarState::AtUpper);
                x.push(up);
            } else {
                state.push(VarState::FreeAtZero);
                x.push(0.0);
            }
        }
        for &j in &lp.start_upper {
            if upper[j].is_finite() {
                state[j] = VarState::AtUpper;
                x[j] = upper[j];
            }
        }
        // residual of the nonbasic start decides the artificial signs
        let mut resid = lp.b.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for (k, res) in resid.iter_mut().enumerate() {
                    *res -= lp.a[j * m + k] * x[j];
                }
            }
        }
        let mut art_sign = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        for (k, &res) in resid.iter().enumerate() {
            art_sign.push(if res >= 0.0 { 1.0 } else { -1.0 });
            lower.push(0.0);
            upper.push(f64::INFINITY);
            state.push(VarState::Basic);
            x.push(res.abs());
            basis.push(n + k);
        }
        // B = diag(art_sign) so B^{-1} = diag(art_sign)
        let mut binv = vec![0.0; m * m];
        for k in 0..m {
            binv[k * m + k] = art_sign[k];
        }
        Worker {
            lp,
            m,
            n,
            nt,
            art_sign,
            state,
            x,
            lower,
            upper,
            basis,
            binv,
            cost: vec![0.0; nt],
            iterations: 0,
            w: vec![0.0; m],
            duals: vec![0.0; m],
        }
    }

    /// w = B^{-1} a_j into self.w
    fn ftran(&mut self, j: usize) {
        let m = self.m;
        if j >= self.n {
            let k = j - self.n;
            let s = self.art_sign[k];
            for r in 0..m {
                self.w[r] = s * self.binv[r * m + k];
            }
            return;
        }
        let col = &self.lp.a[j * m..(j + 1) * m];
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let mut acc = 0.0;
            for k in 0..m {
                acc += row[k] * col[k];
            }
            self.w[r] = acc;
        }
    }

    fn compute_duals(&mut self) {
        let m = self.m;
        for k in 0..m {
            let mut acc = 0.0;
            for r in 0..m {
                acc += self.cost[self.basis[r]] * self.binv[r * m + k];
            }
            self.duals[k] = acc;
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let m = self.m;
        if j >= self.n {
            let k = j - self.n;
            return self.cost[j] - self.duals[k] * self.art_sign[k];
        }
        let col = &self.lp.a[j * m..(j + 1) * m];
        let mut acc = 0.0;
        for k in 0..m {
            acc += self.duals[k] * col[k];
        }
        self.cost[j] - acc
    }

    /// Rebuild the basis inverse from scratch and recompute basic values.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        // assemble [B | I] and Gauss-Jordan with partial pivoting
        // column-major: entry (row, col) of B at mat[col * m + row]
        let mut mat = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            if j >= self.n {
                mat[r * m + (j - self.n)] = self.art_sign[j - self.n];
            } else {
                let col = &self.lp.a[j * m..(j + 1) * m];
                mat[r * m..(r + 1) * m].copy_from_slice(col);
            }
        }
        let mut inv = vec![0.0; m * m];
        for k in 0..m {
            inv[k * m + k] = 1.0;
        }
        for col in 0..m {
            let mut piv_row = col;
            let mut piv_val = mat[col * m + col].abs();
            for r in col + 1..m {
                let v = mat[col * m + r].abs();
                // column-major access: mat[c*m + r] is entry (r, c)... careful
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-12 {
                return Err(Error::Numerical("singular basis in refactorization".into()));
            }
            if piv_row != col {
                for c in 0..m {
                    mat.swap(c * m + piv_row, c * m + col);
                    inv.swap(piv_row * m + c, col * m + c);
                }
                // note: inv is row-major, mat is column-major
            }
            let p = mat[col * m + col];
            for c in 0..m {
                mat[c * m + col] /= p;
            }
            for c in 0..m {
                inv[col * m + c] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = mat[col * m + r];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    mat[c * m + r] -= f * mat[c * m + col];
                }
                for c in 0..m {
                    inv[r * m + c] -= f * inv[col * m + c];
                }
            }
        }
        self.binv = inv;
        // recompute basic values from the nonbasic ones
        let mut resid = self.lp.b.clone();
        for j in 0..self.nt {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            if j >= self.n {
                resid[j - self.n] -= self.art_sign[j - self.n] * self.x[j];
            } else {
                let col = &self.lp.a[j * self.m..(j + 1) * self.m];
                for k in 0..m {
                    resid[k] -= col[k] * self.x[j];
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let mut acc = 0.0;
            for k in 0..m {
                acc += row[k] * resid[k];
            }
            self.x[self.basis[r]] = acc;
        }
        Ok(())
    }

    /// Run the simplex loop for the current cost vector.
    fn optimize(&mut self, max_iter: usize) -> Result<()> {
        let mut bland = false;
        let mut degen_streak = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Err(Error::Numerical(format!(
                    "simplex exceeded the anti-cycling budget of {max_iter} iterations"
                )));
            }
            self.compute_duals();
            // pricing: dense dot of the duals against every nonbasic column
            let mut enter: Option<(usize, f64, f64)> = None; // (j, |d|, dir)
            let m = self.m;
            let duals = &self.duals;
            'pricing: for (j, col) in self.lp.a.chunks_exact(m).enumerate() {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let mut acc0 = 0.0;
                let mut acc1 = 0.0;
                let mut k = 0;
                while k + 1 < m {
                    acc0 += duals[k] * col[k];
                    acc1 += duals[k + 1] * col[k + 1];
                    k += 2;
                }
                if k < m {
                    acc0 += duals[k] * col[k];
                }
                let d = self.cost[j] - (acc0 + acc1);
                let dir = match self.state[j] {
                    VarState::AtLower if d < -TOL_REDUCED => 1.0,
                    VarState::AtUpper if d > TOL_REDUCED => -1.0,
                    VarState::FreeAtZero if d.abs() > TOL_REDUCED => -d.signum(),
                    _ => continue,
                };
                if bland {
                    enter = Some((j, d.abs(), dir));
                    break 'pricing;
                }
                match enter {
                    Some((_, best, _)) if d.abs() <= best => {}
                    _ => enter = Some((j, d.abs(), dir)),
                }
            }
            // artificial columns are unit vectors; price them directly.
            // Bland's rule scans lowest index first, and every artificial
            // index is above every structural one.
            if enter.is_none() || !bland {
                for j in self.n..self.nt {
                    if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                        continue;
                    }
                    let d = self.reduced_cost(j);
                    let dir = match self.state[j] {
                        VarState::AtLower if d < -TOL_REDUCED => 1.0,
                        VarState::AtUpper if d > TOL_REDUCED => -1.0,
                        VarState::FreeAtZero if d.abs() > TOL_REDUCED => -d.signum(),
                        _ => continue,
                    };
                    if bland {
                        enter = Some((j, d.abs(), dir));
                        break;
                    }
                    match enter {
                        Some((_, best, _)) if d.abs() <= best => {}
                        _ => enter = Some((j, d.abs(), dir)),
                    }
                }
            }
            let Some((je, _, dir)) = enter else {
                return Ok(()); // optimal for this phase
            };
            self.ftran(je);
            // ratio test
            let own_span = self.upper[je] - self.lower[je]; // may be inf
            let mut t_best = own_span;
            let mut leave: Option<(usize, f64, bool)> = None; // (row, |pivot|, to_upper)
            for r in 0..self.m {
                let rate = -dir * self.w[r];
                if rate.abs() <= TOL_PIVOT {
                    continue;
                }
                let q = self.basis[r];
                let (room, to_upper) = if rate < 0.0 {
                    (self.x[q] - self.lower[q], false)
                } else {
                    (self.upper[q] - self.x[q], true)
                };
                if !room.is_finite() {
                    continue;
                }
                let t = (room.max(0.0)) / rate.abs();
                let better = match leave {
                    None => t < t_best - 1e-12,
                    Some((rl, piv, _)) => {
                        if t < t_best - 1e-12 {
                            true
                        } else if t <= t_best + 1e-12 {
                            if bland {
                                self.basis[r] < self.basis[rl]
                            } else {
                                // at ties, drive artificials out first, then
                                // take the numerically strongest pivot
                                let art_new = self.basis[r] >= self.n;
                                let art_old = self.basis[rl] >= self.n;
                                art_new && !art_old
                                    || (art_new == art_old && self.w[r].abs() > piv)
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    t_best = t.min(t_best);
                    leave = Some((r, self.w[r].abs(), to_upper));
                }
            }
            if leave.is_none() && !own_span.is_finite() {
                return Err(Error::Numerical(
                    "simplex: unbounded improving direction".into(),
                ));
            }
            let t = t_best.max(0.0);
            // apply the step
            self.x[je] += dir * t;
            for r in 0..self.m {
                let q = self.basis[r];
                self.x[q] -= dir * t * self.w[r];
            }
            self.iterations += 1;
            since_refactor += 1;
            match leave {
                None => {
                    // bound flip
                    self.state[je] = if dir > 0.0 {
                        self.x[je] = self.upper[je];
                        VarState::AtUpper
                    } else {
                        self.x[je] = self.lower[je];
                        VarState::AtLower
                    };
                }
                Some((row, _, to_upper)) => {
                    let ql = self.basis[row];
                    self.state[ql] = if to_upper {
                        self.x[ql] = self.upper[ql];
                        VarState::AtUpper
                    } else {
                        self.x[ql] = self.lower[ql];
                        VarState::AtLower
                    };
                    self.basis[row] = je;
                    self.state[je] = VarState::Basic;
                    // product-form update of binv
                    let piv = self.w[row];
                    let m = self.m;
                    for c in 0..m {
                        self.binv[row * m + c] /= piv;
                    }
                    for r in 0..m {
                        if r == row {
                            continue;
                        }
                        let f = self.w[r];
                        if f == 0.0 {
                            continue;
                        }
                        for c in 0..m {
                            self.binv[r * m + c] -= f * self.binv[row * m + c];
                        }
                    }
                }
            }
            if t <= TOL_STEP_DEGEN {
                degen_streak += 1;
                if degen_streak >= DEGEN_STREAK_FOR_BLAND {
                    bland = true;
                }
            } else {
                degen_streak = 0;
                bland = false;
            }
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }
}

/// Solve the program. Errors only on numerical breakdown; an unsatisfiable
/// constraint system is reported through `feasible = false`.
pub fn solve(lp: &Lp) -> Result<Solution> {
    assert_eq!(lp.a.len(), lp.rows * lp.cols);
    assert_eq!(lp.b.len(), lp.rows);
    assert_eq!(lp.cost.len(), lp.cols);
    let mut wk = Worker::new(lp);
    let max_iter = 20_000 + 40 * (wk.m + wk.n);

    // phase 1: drive the artificials to zero
    for j in 0..wk.n {
        wk.cost[j] = 0.0;
    }
    for j in wk.n..wk.nt {
        wk.cost[j] = 1.0;
    }
    wk.optimize(max_iter)?;
    let phase1_iters = wk.iterations;
    // feasibility must be judged against the size of what the rows demand,
    // or a tiny right-hand side (alpha near 1) passes vacuously
    let b_scale: f64 = lp.b.iter().map(|v| v.abs()).sum();
    let infeas: f64 = (wk.n..wk.nt).map(|j| wk.x[j]).sum();
    if infeas > 1e-9 + 1e-7 * b_scale {
        return Ok(Solution {
            feasible: false,
            x: vec![0.0; lp.cols],
            duals: vec![0.0; lp.rows],
            reduced_costs: vec![0.0; lp.cols],
            objective: f64::NAN,
            iterations: wk.iterations,
            degenerate: false,
        });
    }
    // pin artificials to zero for phase 2 (basic ones may remain at level 0)
    for j in wk.n..wk.nt {
        wk.upper[j] = 0.0;
        if wk.state[j] != VarState::Basic {
            wk.state[j] = VarState::AtLower;
            wk.x[j] = 0.0;
        } else {
            wk.x[j] = 0.0;
        }
    }

    // phase 2: the real objective
    wk.cost[..wk.n].copy_from_slice(&lp.cost);
    for j in wk.n..wk.nt {
        wk.cost[j] = 0.0;
    }
    wk.optimize(max_iter)?;
    if std::env::var_os("ESCONTOUR_SIMPLEX_TRACE").is_some() {
        eprintln!(
            "simplex trace: phase1 {} iters, phase2 {} iters",
            phase1_iters,
            wk.iterations - phase1_iters
        );
    }

    // clean final quantities from a fresh factorization
    wk.refactor()?;
    wk.compute_duals();
    let mut reduced = vec![0.0; lp.cols];
    let mut degenerate = false;
    for j in 0..wk.n {
        reduced[j] = wk.reduced_cost(j);
        if wk.state[j] != VarState::Basic && reduced[j].abs() <= 1e-9 {
            degenerate = true;
        }
    }
    for r in 0..wk.m {
        let q = wk.basis[r];
        if q < wk.n {
            let near_lo = wk.lower[q].is_finite() && (wk.x[q] - wk.lower[q]).abs() <= 1e-9;
            let near_up = wk.upper[q].is_finite() && (wk.upper[q] - wk.x[q]).abs() <= 1e-9;
            if near_lo || near_up {
                degenerate = true;
            }
        }
    }
    let x: Vec<f64> = wk.x[..wk.n].to_vec();
    let objective = x.iter().zip(lp.cost.iter()).map(|(a, b)| a * b).sum();
    Ok(Solution {
        feasible: true,
        x,
        duals: wk.duals.clone(),
        reduced_costs: reduced,
        objective,
        iterations: wk.iterations,
        degenerate,
    })
}
