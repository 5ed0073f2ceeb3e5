//! Monte Carlo verification engine: synthetic return panels, an exact
//! vertex solution of the scenario ES linear program, and ensemble
//! statistics for the theory predictions.
//!
//! The scenario program
//!
//!   minimize (1-alpha) T eps + sum_t u_t
//!   s.t.     u_t >= 0,  u_t + eps + sum_i x_it w_i >= 0,  sum_i w_i = N
//!
//! is solved through its dual, which has only N+1 rows:
//!
//!   maximize N mu   s.t.  sum_t y_t = (1-alpha) T,
//!                         sum_t x_it y_t + mu = 0 (each i),  0 <= y_t <= 1.
//!
//! The optimal (eps, w) are the negated row multipliers of the dual, the
//! slack u_t follows from complementarity, and the recovered point is a
//! vertex of the original program. An unsatisfiable dual system is exactly
//! the unbounded primal: the mirage of arbitrage, where some portfolio
//! direction dominates every scenario in the sample.

use crate::error::{Error, Result};
use crate::parametric;
use crate::simplex::{self, Lp};
use rand::distributions::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use rayon::prelude::*;
use serde::Serialize;

/// Return distribution of the synthetic panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReturnDistribution {
    /// i.i.d. standard normal entries.
    GaussianUnit,
    /// i.i.d. raw Student t variates with `nu` degrees of freedom (nu > 2).
    /// No variance standardization: every compared metric is scale-free.
    Student { nu: f64 },
}

impl std::fmt::Display for ReturnDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReturnDistribution::GaussianUnit => write!(f, "gaussian"),
            ReturnDistribution::Student { nu } => write!(f, "student:{nu}"),
        }
    }
}

/// Shape, distribution and seeding of a synthetic ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSpec {
    pub n_assets: usize,
    pub horizon: usize,
    pub distribution: ReturnDistribution,
    pub master_seed: u64,
}

/// An N x T panel of returns, scenario-major: `data[t * N + i]` = x_it.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    pub n_assets: usize,
    pub horizon: usize,
    pub data: Vec<f64>,
}

impl SampleMatrix {
    #[inline]
    pub fn at(&self, asset: usize, scenario: usize) -> f64 {
        self.data[scenario * self.n_assets + asset]
    }

    /// Uniform shift of every entry (common-random-number perturbations).
    pub fn shifted(&self, xi: f64) -> SampleMatrix {
        SampleMatrix {
            n_assets: self.n_assets,
            horizon: self.horizon,
            data: self.data.iter().map(|v| v + xi).collect(),
        }
    }
}

/// Draw the panel for `sample_index`. The stream is a pure function of
/// (master_seed, sample_index), so ensembles are reproducible and the
/// samples are independent of evaluation order.
pub fn generate_returns(spec: &SampleSpec, sample_index: u64) -> Result<SampleMatrix> {
    if spec.n_assets == 0 || spec.horizon == 0 {
        return Err(Error::domain("sample dimensions must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(sample_index);
    let len = spec.n_assets * spec.horizon;
    let mut data = Vec::with_capacity(len);
    match spec.distribution {
        ReturnDistribution::GaussianUnit => {
            for _ in 0..len {
                data.push(StandardNormal.sample(&mut rng));
            }
        }
        ReturnDistribution::Student { nu } => {
            if !(nu > 2.0) {
                return Err(Error::domain(format!(
                    "Student returns require nu > 2, got {nu}"
                )));
            }
            let dist = StudentT::new(nu)
                .map_err(|e| Error::domain(format!("invalid Student parameter: {e}")))?;
            for _ in 0..len {
                data.push(dist.sample(&mut rng));
            }
        }
    }
    Ok(SampleMatrix {
        n_assets: spec.n_assets,
        horizon: spec.horizon,
        data,
    })
}

/// Outcome of one scenario LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    /// The objective is unbounded below: some direction dominates every
    /// scenario (mirage of arbitrage).
    Unbounded,
}

/// Exact vertex optimum of the scenario ES program.
#[derive(Debug, Clone)]
pub struct EsLpSolution {
    pub status: LpStatus,
    /// Optimal weights, sum to N (empty when unbounded).
    pub weights: Vec<f64>,
    /// The VaR-proxy level at the returned vertex.
    pub epsilon_hat: f64,
    /// Scenario slacks u_t >= 0.
    pub slacks: Vec<f64>,
    /// Cost value E = (1-alpha) T eps + sum u_t.
    pub objective: f64,
    /// Set when the vertex is degenerate / alternative optima exist
    /// (e.g. the optimal eps is an interval).
    pub degenerate: bool,
    pub iterations: usize,
}

/// Solve the ES linear program for one sample at confidence level `alpha`.
pub fn solve_es_lp(x: &SampleMatrix, alpha: f64) -> Result<EsLpSolution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "solve_es_lp requires alpha in (0,1), got {alpha}"
        )));
    }
    let n = x.n_assets;
    let t = x.horizon;
    let m = n + 1;
    let cols = t + 1;
    let mut a = vec![0.0; m * cols];
    for s in 0..t {
        let col = &mut a[s * m..(s + 1) * m];
        col[0] = 1.0;
        col[1..].copy_from_slice(&x.data[s * n..(s + 1) * n]);
    }
    // mu column
    let col = &mut a[t * m..(t + 1) * m];
    for e in col.iter_mut().skip(1) {
        *e = 1.0;
    }
    let mut b = vec![0.0; m];
    b[0] = (1.0 - alpha) * t as f64;
    let mut cost = vec![0.0; cols];
    cost[t] = -(n as f64);
    let mut lower = vec![0.0; cols];
    let mut upper = vec![1.0; cols];
    lower[t] = f64::NEG_INFINITY;
    upper[t] = f64::INFINITY;
    // crash start: the dual multipliers of the tail scenarios sit at their
    // upper bound at the optimum; seed them from the equal-weight portfolio
    let k = ((1.0 - alpha) * t as f64).floor() as usize;
    let start_upper = if k > 0 {
        let mut order: Vec<usize> = (0..t).collect();
        let loss = |s: usize| -> f64 { -x.data[s * n..(s + 1) * n].iter().sum::<f64>() };
        order.sort_unstable_by(|&a, &b| {
            loss(b).partial_cmp(&loss(a)).unwrap().then(a.cmp(&b))
        });
        order.truncate(k.min(t));
        order
    } else {
        Vec::new()
    };
    let lp = Lp {
        rows: m,
        cols,
        a,
        b,
        cost,
        lower,
        upper,
        start_upper,
    };
    let sol = simplex::solve(&lp)?;
    if !sol.feasible {
        return Ok(EsLpSolution {
            status: LpStatus::Unbounded,
            weights: Vec::new(),
            epsilon_hat: f64::NAN,
            slacks: Vec::new(),
            objective: f64::NEG_INFINITY,
            degenerate: false,
            iterations: sol.iterations,
        });
    }
    let epsilon_hat = -sol.duals[0];
    let weights: Vec<f64> = (1..m).map(|i| -sol.duals[i]).collect();
    // complementarity: the reduced cost of y_t is the scenario margin
    // eps + sum_i x_it w_i; its negative part is the slack u_t.
    let slacks: Vec<f64> = (0..t).map(|s| (-sol.reduced_costs[s]).max(0.0)).collect();
    let objective =
        (1.0 - alpha) * t as f64 * epsilon_hat + slacks.iter().sum::<f64>();
    // vertex certificates: budget, duality gap against the dual objective
    let budget: f64 = weights.iter().sum();
    let nf = n as f64;
    if (budget - nf).abs() > 1e-8 * nf.max(1.0) {
        return Err(Error::Numerical(format!(
            "budget violated at recovered vertex: sum w = {budget}, N = {n}"
        )));
    }
    let dual_obj = nf * sol.x[t];
    if (objective - dual_obj).abs() > 1e-8 * (1.0 + objective.abs()) {
        return Err(Error::Numerical(format!(
            "duality gap at recovered vertex: E = {objective}, N mu = {dual_obj}"
        )));
    }
    Ok(EsLpSolution {
        status: LpStatus::Optimal,
        weights,
        epsilon_hat,
        slacks,
        objective,
        degenerate: sol.degenerate,
        iterations: sol.iterations,
    })
}

/// Histogram with uniform bins.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Histogram {
        if values.is_empty() || bins == 0 {
            return Histogram {
                edges: vec![],
                counts: vec![],
            };
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }
}

/// Per-sample metrics derived from one optimal LP solution.
#[derive(Debug, Clone, Serialize)]
pub struct SampleMetrics {
    /// (1/N) sum w_i^2, the finite-N estimate of q0.
    pub q0_hat: f64,
    /// sqrt(q0_hat) - 1.
    pub est_error_hat: f64,
    /// In-sample ES, E / ((1-alpha) T).
    pub es_in: f64,
    /// es_in / (phi(alpha) sqrt(N)): in-sample over true ES.
    pub es_in_ratio: f64,
    /// The LP's VaR-proxy level.
    pub var_hat: f64,
    pub weight_histogram: Histogram,
}

/// Derive the error metrics of an optimal solution.
pub fn sample_metrics(sol: &EsLpSolution, spec: &SampleSpec, alpha: f64) -> Result<SampleMetrics> {
    if sol.status != LpStatus::Optimal {
        return Err(Error::domain(
            "sample_metrics requires an Optimal LP solution",
        ));
    }
    let n = spec.n_assets as f64;
    let t = spec.horizon as f64;
    let q0_hat = sol.weights.iter().map(|w| w * w).sum::<f64>() / n;
    let es_in = sol.objective / ((1.0 - alpha) * t);
    let phi = parametric::phi_factor(alpha)?;
    Ok(SampleMetrics {
        q0_hat,
        est_error_hat: q0_hat.sqrt() - 1.0,
        es_in,
        es_in_ratio: es_in / (phi * n.sqrt()),
        var_hat: sol.epsilon_hat,
        weight_histogram: Histogram::new(&sol.weights, 30),
    })
}

/// Empirical ES at level `alpha` of a fixed-weight portfolio over a panel:
/// the average of the largest (1-alpha)T losses. Used to evaluate estimated
/// weights out of sample under the true return process.
pub fn portfolio_empirical_es(x: &SampleMatrix, weights: &[f64], alpha: f64) -> Result<f64> {
    if weights.len() != x.n_assets {
        return Err(Error::domain(format!(
            "weight vector length {} does not match N = {}",
            weights.len(),
            x.n_assets
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "portfolio ES requires alpha in (0,1), got {alpha}"
        )));
    }
    let t = x.horizon;
    let n = x.n_assets;
    let mut losses: Vec<f64> = (0..t)
        .map(|s| {
            let row = &x.data[s * n..(s + 1) * n];
            -row.iter().zip(weights).map(|(r, w)| r * w).sum::<f64>()
        })
        .collect();
    let k = (((1.0 - alpha) * t as f64).round() as usize).clamp(1, t);
    let cut = t - k;
    losses.select_nth_unstable_by(cut, |a, b| a.partial_cmp(b).unwrap());
    Ok(losses[cut..].iter().sum::<f64>() / k as f64)
}

/// One ensemble row; metric fields are absent for unbounded samples.
#[derive(Debug, Clone, Serialize)]
pub struct SampleRecord {
    pub index: u64,
    pub status: LpStatus,
    pub q0_hat: Option<f64>,
    pub est_error_hat: Option<f64>,
    pub epsilon_hat: Option<f64>,
    pub es_in_ratio: Option<f64>,
}

/// Mean / standard deviation / standard error over the feasible samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

fn stats_over(values: &[f64]) -> MetricStats {
    let n = values.len();
    if n == 0 {
        return MetricStats {
            mean: f64::NAN,
            std: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MetricStats {
            mean,
            std: 0.0,
            stderr: 0.0,
        };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    let std = var.sqrt();
    MetricStats {
        mean,
        std,
        stderr: std / (n as f64).sqrt(),
    }
}

/// Aggregated ensemble results.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub spec: SampleSpec,
    pub alpha: f64,
    /// Uniform shift applied to every return before optimization.
    pub shift: f64,
    pub n_samples: usize,
    pub feasible_count: usize,
    pub q0_hat: MetricStats,
    pub est_error: MetricStats,
    pub epsilon_hat: MetricStats,
    pub es_in_ratio: MetricStats,
    pub est_error_histogram: Histogram,
    #[serde(skip)]
    pub records: Vec<SampleRecord>,
}

impl EnsembleStats {
    pub fn feasible_fraction(&self) -> f64 {
        self.feasible_count as f64 / self.n_samples as f64
    }

    /// One row per sample: `index,status,q0_hat,est_error_hat,epsilon_hat,es_in_ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,status,q0_hat,est_error_hat,epsilon_hat,es_in_ratio\n");
        for rec in &self.records {
            let field = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rec.index,
                match rec.status {
                    LpStatus::Optimal => "optimal",
                    LpStatus::Unbounded => "unbounded",
                },
                field(rec.q0_hat),
                field(rec.est_error_hat),
                field(rec.epsilon_hat),
                field(rec.es_in_ratio),
            ));
        }
        out
    }

    /// Summary object: moments, feasible fraction and the full config echo.
    pub fn to_json_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "config": {
                "n_assets": self.spec.n_assets,
                "horizon": self.spec.horizon,
                "distribution": self.spec.distribution.to_string(),
                "alpha": self.alpha,
                "shift": self.shift,
                "n_samples": self.n_samples,
            },
            "seed": self.spec.master_seed,
            "feasible_fraction": self.feasible_fraction(),
            "feasible_count": self.feasible_count,
            "q0_hat": self.q0_hat,
            "est_error": self.est_error,
            "epsilon_hat": self.epsilon_hat,
            "es_in_ratio": self.es_in_ratio,
            "est_error_histogram": self.est_error_histogram,
        })
    }
}

fn run_one(spec: &SampleSpec, alpha: f64, shift: f64, index: u64) -> Result<SampleRecord> {
    let mut x = generate_returns(spec, index)?;
    if shift != 0.0 {
        x = x.shifted(shift);
    }
    let sol = solve_es_lp(&x, alpha)?;
    Ok(match sol.status {
        LpStatus::Optimal => {
            let m = sample_metrics(&sol, spec, alpha)?;
            SampleRecord {
                index,
                status: LpStatus::Optimal,
                q0_hat: Some(m.q0_hat),
                est_error_hat: Some(m.est_error_hat),
                epsilon_hat: Some(m.var_hat),
                es_in_ratio: Some(m.es_in_ratio),
            }
        }
        LpStatus::Unbounded => SampleRecord {
            index,
            status: LpStatus::Unbounded,
            q0_hat: None,
            est_error_hat: None,
            epsilon_hat: None,
            es_in_ratio: None,
        },
    })
}

/// Run `n_samples` independent samples (in parallel; aggregation is in
/// sample-index order, so the result is schedule-independent) and aggregate
/// the metrics over the feasible ones.
pub fn run_ensemble_shifted(
    spec: &SampleSpec,
    alpha: f64,
    shift: f64,
    n_samples: usize,
) -> Result<EnsembleStats> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be >= 1"));
    }
    let records: Vec<SampleRecord> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| run_one(spec, alpha, shift, i))
        .collect::<Result<Vec<_>>>()?;
    let feasible: Vec<&SampleRecord> = records
        .iter()
        .filter(|r| r.status == LpStatus::Optimal)
        .collect();
    if feasible.is_empty() {
        return Err(Error::AllInfeasible(n_samples));
    }
    let pull = |f: fn(&SampleRecord) -> Option<f64>| -> Vec<f64> {
        feasible.iter().filter_map(|r| f(r)).collect()
    };
    let est_errors = pull(|r| r.est_error_hat);
    Ok(EnsembleStats {
        spec: *spec,
        alpha,
        shift,
        n_samples,
        feasible_count: feasible.len(),
        q0_hat: stats_over(&pull(|r| r.q0_hat)),
        est_error: stats_over(&est_errors),
        epsilon_hat: stats_over(&pull(|r| r.epsilon_hat)),
        es_in_ratio: stats_over(&pull(|r| r.es_in_ratio)),
        est_error_histogram: Histogram::new(&est_errors, 40),
        records,
    })
}

/// Ensemble without a shift.
pub fn run_ensemble(spec: &SampleSpec, alpha: f64, n_samples: usize) -> Result<EnsembleStats> {
    run_ensemble_shifted(spec, alpha, 0.0, n_samples)
}

/// Fraction of samples whose LP is bounded. Total: returns 0.0 when every
/// sample is unbounded.
pub fn feasibility_probability(spec: &SampleSpec, alpha: f64, n_samples: usize) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be >= 1"));
    }
    let feasible = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let x = generate_returns(spec, i)?;
            Ok(solve_es_lp(&x, alpha)?.status == LpStatus::Optimal)
        })
        .collect::<Result<Vec<bool>>>()?
        .iter()
        .filter(|&&ok| ok)
        .count();
    Ok(feasible as f64 / n_samples as f64)
}

/// Central finite-difference estimate of d mean(sqrt(q0_hat)) / d xi at
/// xi = 0, with common random numbers at +-xi. Pairs where either side is
/// unbounded are skipped.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_pairs: usize,
}

pub fn susceptibility_fd(
    spec: &SampleSpec,
    alpha: f64,
    xi: f64,
    n_samples: usize,
) -> Result<FdEstimate> {
    if !(xi > 0.0) {
        return Err(Error::domain(format!("shift xi must be > 0, got {xi}")));
    }
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be >= 1"));
    }
    let diffs: Vec<Option<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let x = generate_returns(spec, i)?;
            let up = solve_es_lp(&x.shifted(xi), alpha)?;
            let dn = solve_es_lp(&x.shifted(-xi), alpha)?;
            if up.status != LpStatus::Optimal || dn.status != LpStatus::Optimal {
                return Ok(None);
            }
            let n = spec.n_assets as f64;
            let sq_up = (up.weights.iter().map(|w| w * w).sum::<f64>() / n).sqrt();
            let sq_dn = (dn.weights.iter().map(|w| w * w).sum::<f64>() / n).sqrt();
            Ok(Some(sq_up - sq_dn))
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<f64> = diffs.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::AllInfeasible(n_samples));
    }
    let st = stats_over(&used);
    Ok(FdEstimate {
        value: st.mean / (2.0 * xi),
        stderr: st.stderr / (2.0 * xi),
        n_pairs: used.len(),
    })
}
