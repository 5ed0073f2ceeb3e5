//! Landscape artifacts over the (alpha, r) plane: metric grids, traced
//! contour lines, phase boundaries and required-sample-size tables.

use crate::error::{Error, Result};
use crate::parametric;
use crate::replica::{self, ControlPoint};
use crate::roots;
use rayon::prelude::*;
use serde::Serialize;

/// Metrics that can be mapped. `Chi` and `Zeta` are the scaled ratios,
/// finite across the phase boundary; the rest require feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// sqrt(q0) - 1
    EstError,
    Q0,
    /// weight susceptibility Delta
    Delta,
    /// susceptibility Delta/sqrt(q0)
    Chi,
    /// epsilon/sqrt(q0)
    Zeta,
    /// VaR proxy epsilon
    Epsilon,
    /// in-sample over true ES
    EsInRatio,
}

impl Metric {
    pub fn requires_feasibility(self) -> bool {
        !matches!(self, Metric::Chi | Metric::Zeta)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::EstError => "est_error",
            Metric::Q0 => "q0",
            Metric::Delta => "delta",
            Metric::Chi => "chi",
            Metric::Zeta => "zeta",
            Metric::Epsilon => "epsilon",
            Metric::EsInRatio => "es_in_ratio",
        }
    }

    pub fn parse(s: &str) -> Result<Metric> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "est_error" | "est-error" => Metric::EstError,
            "q0" => Metric::Q0,
            "delta" => Metric::Delta,
            "chi" | "susceptibility" => Metric::Chi,
            "zeta" => Metric::Zeta,
            "epsilon" => Metric::Epsilon,
            "es_in_ratio" | "es-in-ratio" => Metric::EsInRatio,
            other => {
                return Err(Error::domain(format!(
                    "unknown metric '{other}' (expected est_error, q0, delta, chi, zeta, epsilon, es_in_ratio)"
                )))
            }
        })
    }
}

/// Evaluate a metric at one control point.
pub fn evaluate(metric: Metric, alpha: f64, r: f64) -> Result<f64> {
    let p = ControlPoint::new(alpha, r)?;
    match metric {
        Metric::Chi => replica::solve_ratios(p).map(|(chi, _)| chi),
        Metric::Zeta => replica::solve_ratios(p).map(|(_, zeta)| zeta),
        Metric::Q0 => replica::solve_order_params(p).map(|op| op.q0),
        Metric::Delta => replica::solve_order_params(p).map(|op| op.delta),
        Metric::Epsilon => replica::solve_order_params(p).map(|op| op.epsilon),
        Metric::EstError => replica::solve_order_params(p).map(|op| op.q0.sqrt() - 1.0),
        Metric::EsInRatio => {
            let op = replica::solve_order_params(p)?;
            let phi = parametric::phi_factor(alpha)?;
            Ok(r / ((1.0 - alpha) * op.delta * phi))
        }
    }
}

/// Cell-level outcome for grids and tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Infeasible,
    OutOfDomain,
    NoConvergence,
}

impl CellStatus {
    fn name(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Infeasible => "infeasible",
            CellStatus::OutOfDomain => "out_of_domain",
            CellStatus::NoConvergence => "no_convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridCell {
    pub alpha: f64,
    pub r: f64,
    pub value: Option<f64>,
    pub status: CellStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    pub metric: Metric,
    pub alphas: Vec<f64>,
    pub rs: Vec<f64>,
    /// row-major: alphas outer, rs inner
    pub cells: Vec<GridCell>,
}

fn check_increasing(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::domain(format!("{name} grid is empty")));
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    Ok(())
}

fn status_of(err: &Error) -> CellStatus {
    match err {
        Error::InfeasibleRegion { .. } => CellStatus::Infeasible,
        Error::Domain(_) => CellStatus::OutOfDomain,
        _ => CellStatus::NoConvergence,
    }
}

/// Evaluate `metric` on the product grid. Cells outside the domain or beyond
/// the phase boundary carry a status, not a number.
pub fn evaluate_grid(metric: Metric, alphas: &[f64], rs: &[f64]) -> Result<Grid> {
    check_increasing("alpha", alphas)?;
    check_increasing("r", rs)?;
    let rows: Vec<Vec<GridCell>> = alphas
        .par_iter()
        .map(|&alpha| {
            let boundary = if metric.requires_feasibility() && alpha > 0.0 && alpha < 1.0 {
                replica::phase_boundary(alpha).ok()
            } else {
                None
            };
            rs.iter()
                .map(|&r| {
                    if !(alpha > 0.0 && alpha < 1.0) || !(r > 0.0 && r < 1.0) {
                        return GridCell {
                            alpha,
                            r,
                            value: None,
                            status: CellStatus::OutOfDomain,
                        };
                    }
                    if let Some(b) = boundary {
                        if r >= b {
                            return GridCell {
                                alpha,
                                r,
                                value: None,
                                status: CellStatus::Infeasible,
                            };
                        }
                    }
                    match evaluate(metric, alpha, r) {
                        Ok(v) => GridCell {
                            alpha,
                            r,
                            value: Some(v),
                            status: CellStatus::Ok,
                        },
                        Err(e) => GridCell {
                            alpha,
                            r,
                            value: None,
                            status: status_of(&e),
                        },
                    }
                })
                .collect()
        })
        .collect();
    Ok(Grid {
        metric,
        alphas: alphas.to_vec(),
        rs: rs.to_vec(),
        cells: rows.into_iter().flatten().collect(),
    })
}

impl Grid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,r,value,status\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{}\n",
                c.alpha,
                c.r,
                c.value.map(|v| v.to_string()).unwrap_or_default(),
                c.status.name()
            ));
        }
        out
    }
}

/// One traced point of an iso-metric curve. `branch` indexes multiple roots
/// in r at the same alpha (contours of Delta bend over).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContourPoint {
    pub alpha: f64,
    pub r: f64,
    pub branch: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourLine {
    pub metric: Metric,
    pub level: f64,
    /// sorted by alpha, then branch
    pub points: Vec<ContourPoint>,
}

impl ContourLine {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,r,metric,level,branch\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.alpha,
                p.r,
                self.metric.name(),
                self.level,
                p.branch
            ));
        }
        out
    }
}

/// Trace the `metric = level` set: for every alpha on the grid, scan r for
/// sign changes and refine each bracketed root by Brent to
/// |metric - level| <= 1e-6 max(1, |level|). Every bracketed root is
/// reported as its own branch, ordered by increasing r.
pub fn trace_contour(
    metric: Metric,
    level: f64,
    alphas: &[f64],
    scan_points: usize,
) -> Result<ContourLine> {
    check_increasing("alpha", alphas)?;
    let scan = scan_points.max(16);
    let ftol = 1e-8 * level.abs().max(1.0);
    let per_alpha: Vec<Vec<ContourPoint>> = alphas
        .par_iter()
        .map(|&alpha| {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Vec::new();
            }
            let r_hi = if metric.requires_feasibility() {
                match replica::phase_boundary(alpha) {
                    Ok(b) => b * (1.0 - 1e-6),
                    Err(_) => return Vec::new(),
                }
            } else {
                1.0 - 1e-8
            };
            let r_lo = 1e-8;
            if r_hi <= r_lo {
                return Vec::new();
            }
            let f = |r: f64| evaluate(metric, alpha, r).ok().map(|v| v - level);
            let mut pts = Vec::new();
            for (a, b, fa, fb) in roots::scan_brackets(f, r_lo, r_hi, scan) {
                let root = if a == b {
                    Some(a)
                } else {
                    roots::brent(
                        |r| f(r).unwrap_or(f64::NAN),
                        a,
                        b,
                        fa,
                        fb,
                        1e-13,
                        ftol,
                        200,
                    )
                    .ok()
                    .map(|rt| rt.x)
                };
                if let Some(r) = root {
                    pts.push(ContourPoint {
                        alpha,
                        r,
                        branch: pts.len(),
                    });
                }
            }
            pts
        })
        .collect();
    let points: Vec<ContourPoint> = per_alpha.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::EmptyContour {
            metric: metric.name().to_string(),
            level,
        });
    }
    Ok(ContourLine {
        metric,
        level,
        points,
    })
}

/// Which estimate a table / boundary refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Historical,
    Parametric,
}

impl Estimator {
    pub fn parse(s: &str) -> Result<Estimator> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "historical" => Estimator::Historical,
            "parametric" => Estimator::Parametric,
            other => {
                return Err(Error::domain(format!(
                    "unknown estimator '{other}' (expected historical or parametric)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TableCell {
    /// rounded T/N needed for the stated error (absent on solver failure)
    pub t_over_n: Option<i64>,
    /// the unrounded aspect ratio behind the entry
    pub r: Option<f64>,
    pub status: CellStatus,
}

/// Required sample sizes: rounded T/N per (error level, alpha).
#[derive(Debug, Clone, Serialize)]
pub struct AspectTable {
    pub estimator: Estimator,
    /// relative error targets sqrt(q0) - 1
    pub error_levels: Vec<f64>,
    pub alphas: Vec<f64>,
    /// indexed `cells[error][alpha]`
    pub cells: Vec<Vec<TableCell>>,
}

/// Round half away from zero; the convention validated against both tables.
pub fn round_half_away(x: f64) -> i64 {
    if x >= 0.0 {
        (x + 0.5).floor() as i64
    } else {
        -((-x + 0.5).floor() as i64)
    }
}

fn historical_r_for_error(alpha: f64, err: f64) -> Result<f64> {
    let boundary = replica::phase_boundary(alpha)?;
    let r_hi = boundary * (1.0 - 1e-6);
    let r_lo = 1e-9;
    let f = |r: f64| match evaluate(Metric::EstError, alpha, r) {
        Ok(v) => v - err,
        Err(_) => f64::NAN,
    };
    let fa = f(r_lo);
    let fb = f(r_hi);
    if !(fa < 0.0 && fb > 0.0) {
        return Err(Error::NoConvergence(format!(
            "error level {err} not bracketed at alpha {alpha}"
        )));
    }
    Ok(roots::brent(f, r_lo, r_hi, fa, fb, 1e-13, 1e-11, 200)?.x)
}

/// Build the required-T/N table for either estimator.
pub fn required_aspect_table(
    estimator: Estimator,
    error_levels: &[f64],
    alphas: &[f64],
) -> Result<AspectTable> {
    if error_levels.is_empty() || error_levels.iter().any(|e| *e <= 0.0) {
        return Err(Error::domain("error levels must be positive"));
    }
    check_increasing("alpha", alphas)?;
    let cells: Vec<Vec<TableCell>> = error_levels
        .par_iter()
        .map(|&e| {
            alphas
                .iter()
                .map(|&alpha| {
                    let r = match estimator {
                        Estimator::Historical => historical_r_for_error(alpha, e),
                        Estimator::Parametric => {
                            let q0 = (1.0 + e) * (1.0 + e);
                            parametric::contour_r_param(alpha, q0)
                        }
                    };
                    match r {
                        Ok(r) if r > 0.0 => TableCell {
                            t_over_n: Some(round_half_away(1.0 / r)),
                            r: Some(r),
                            status: CellStatus::Ok,
                        },
                        Ok(_) => TableCell {
                            t_over_n: None,
                            r: None,
                            status: CellStatus::OutOfDomain,
                        },
                        Err(e) => TableCell {
                            t_over_n: None,
                            r: None,
                            status: status_of(&e),
                        },
                    }
                })
                .collect()
        })
        .collect();
    Ok(AspectTable {
        estimator,
        error_levels: error_levels.to_vec(),
        alphas: alphas.to_vec(),
        cells,
    })
}

impl AspectTable {
    /// Paper-style layout: one row per error level, one column per alpha.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("error");
        for a in &self.alphas {
            out.push_str(&format!(",{a}"));
        }
        out.push('\n');
        for (i, e) in self.error_levels.iter().enumerate() {
            out.push_str(&format!("{}%", e * 100.0));
            for cell in &self.cells[i] {
                match cell.t_over_n {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryPoint {
    pub alpha: f64,
    pub r: Option<f64>,
    pub status: CellStatus,
}

/// The critical line r*(alpha) of either estimator.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCurve {
    pub estimator: Estimator,
    pub points: Vec<BoundaryPoint>,
}

pub fn phase_boundary_curve(estimator: Estimator, alphas: &[f64]) -> Result<BoundaryCurve> {
    check_increasing("alpha", alphas)?;
    let points: Vec<BoundaryPoint> = alphas
        .par_iter()
        .map(|&alpha| {
            let r = match estimator {
                Estimator::Historical => replica::phase_boundary(alpha),
                Estimator::Parametric => parametric::r_crit_param(alpha),
            };
            match r {
                Ok(r) => BoundaryPoint {
                    alpha,
                    r: Some(r),
                    status: CellStatus::Ok,
                },
                Err(e) => BoundaryPoint {
                    alpha,
                    r: None,
                    status: status_of(&e),
                },
            }
        })
        .collect();
    Ok(BoundaryCurve { estimator, points })
}

impl BoundaryCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,r,status\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.alpha,
                p.r.map(|v| v.to_string()).unwrap_or_default(),
                p.status.name()
            ));
        }
        out
    }
}

/// Uniform grid helper: lo, lo+step, ..., up to and including hi
/// (within half a step).
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi > lo) {
        return Err(Error::domain(format!(
            "bad grid spec {lo}:{hi}:{step}"
        )));
    }
    let n = ((hi - lo) / step + 0.5).floor() as usize;
    Ok((0..=n).map(|k| lo + step * k as f64).collect())
}
