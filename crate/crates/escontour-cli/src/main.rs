//! Command-line front end: saddle-point solutions, contour maps, phase
//! boundaries, required-sample-size tables, parametric estimates and the
//! Monte Carlo LP simulator. Every artifact embeds the tool version, the
//! full configuration echo, the seed (where one applies) and the solver
//! tolerances, so identical invocations produce byte-identical files.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting validation

use clap::{Parser, Subcommand, ValueEnum};
use escontour::analytic;
use escontour::map::{self, Estimator, Metric};
use escontour::parametric;
use escontour::replica::{self, ControlPoint};
use escontour::simulate::{self, ReturnDistribution, SampleSpec};
use escontour::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const VERSION: &str = env!("CARGO_PKG_VERSION");
const TOL_NOTE: &str = "residual=1e-10,ratio=1e-12";

#[derive(Parser)]
#[command(name = "escontour", version, about = "Estimation-error landscape of ES-optimized portfolios")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output path; stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the saddle-point equations at one control point
    Solve {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        r: f64,
    },
    /// Trace an iso-metric contour line over the (alpha, r) plane
    Contour {
        /// est_error | q0 | delta | chi | zeta | epsilon | es_in_ratio
        #[arg(long)]
        metric: String,
        #[arg(long)]
        level: f64,
        /// LO:HI:STEP
        #[arg(long, default_value = "0.5:0.999:0.001")]
        alpha_grid: String,
        /// r-scan subdivisions per alpha used to bracket roots
        #[arg(long, default_value_t = 256)]
        scan: usize,
    },
    /// Evaluate a metric on an (alpha, r) product grid
    Grid {
        /// est_error | q0 | delta | chi | zeta | epsilon | es_in_ratio
        #[arg(long)]
        metric: String,
        /// LO:HI:STEP
        #[arg(long, default_value = "0.5:0.999:0.001")]
        alpha_grid: String,
        /// LO:HI:STEP
        #[arg(long, default_value = "0.01:0.99:0.01")]
        r_grid: String,
    },
    /// Required T/N table over error levels and confidence levels
    Table {
        /// historical | parametric
        #[arg(long)]
        estimator: String,
        /// comma-separated error levels in percent
        #[arg(long, default_value = "5,10,15,20,25,50")]
        errors: String,
        /// comma-separated confidence levels
        #[arg(long, default_value = "0.7,0.8,0.9,0.91,0.92,0.93,0.94,0.95,0.96,0.97,0.975,0.98")]
        alphas: String,
    },
    /// Phase boundary r*(alpha) of either estimator
    Boundary {
        /// historical | parametric
        #[arg(long)]
        estimator: String,
        /// LO:HI:STEP
        #[arg(long, default_value = "0.5:0.999:0.001")]
        alpha_grid: String,
    },
    /// Monte Carlo ensemble of scenario LP optimizations
    Simulate {
        /// gaussian | student:NU
        #[arg(long)]
        dist: String,
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// uniform shift applied to all returns
        #[arg(long, default_value_t = 0.0)]
        shift: f64,
    },
    /// Closed-form parametric estimate: q0 from r, or r from q0
    Parametric {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        q0: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Domain(_) | Error::EmptyContour { .. } => 2,
                Error::InfeasibleRegion { .. } => 3,
                Error::NoConvergence(_) => 4,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let (command, config, seed, json, csv) = match &cli.cmd {
        Cmd::Solve { alpha, r } => cmd_solve(*alpha, *r)?,
        Cmd::Contour {
            metric,
            level,
            alpha_grid,
            scan,
        } => cmd_contour(metric, *level, alpha_grid, *scan)?,
        Cmd::Grid {
            metric,
            alpha_grid,
            r_grid,
        } => cmd_grid(metric, alpha_grid, r_grid)?,
        Cmd::Table {
            estimator,
            errors,
            alphas,
        } => cmd_table(estimator, errors, alphas)?,
        Cmd::Boundary {
            estimator,
            alpha_grid,
        } => cmd_boundary(estimator, alpha_grid)?,
        Cmd::Simulate {
            dist,
            n,
            t,
            alpha,
            samples,
            seed,
            shift,
        } => cmd_simulate(dist, *n, *t, *alpha, *samples, *seed, *shift)?,
        Cmd::Parametric { alpha, q0, r } => cmd_parametric(*alpha, *q0, *r)?,
    };
    let text = match cli.format {
        Format::Csv => {
            let mut head = format!("# escontour {VERSION}\n# command = {command}\n");
            for (k, v) in &config {
                head.push_str(&format!("# {k} = {v}\n"));
            }
            if let Some(s) = seed {
                head.push_str(&format!("# seed = {s}\n"));
            }
            head.push_str(&format!("# tolerances = {TOL_NOTE}\n"));
            head + &csv
        }
        Format::Json => {
            let cfg: serde_json::Map<String, serde_json::Value> = config
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect();
            let envelope = serde_json::json!({
                "tool": "escontour",
                "version": VERSION,
                "command": command,
                "config": cfg,
                "seed": seed,
                "tolerances": TOL_NOTE,
                "results": json,
            });
            serde_json::to_string_pretty(&envelope).expect("serializable") + "\n"
        }
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Numerical(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

type CmdOutput = (
    String,
    Vec<(String, String)>,
    Option<u64>,
    serde_json::Value,
    String,
);

fn kv(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn cmd_solve(alpha: f64, r: f64) -> Result<CmdOutput, Error> {
    let config = kv(&[("alpha", alpha.to_string()), ("r", r.to_string())]);
    if alpha == 1.0 {
        // minimax line: Delta diverges; report the scaled (1-alpha)Delta form
        if r >= 0.5 {
            return Err(Error::InfeasibleRegion {
                alpha,
                r,
                boundary: 0.5,
            });
        }
        let m = analytic::minimax_solution(r)?;
        let rows = vec![
            ("est_error", m.sqrt_q0 - 1.0),
            ("es_out_ratio", m.sqrt_q0),
            ("q0", m.sqrt_q0 * m.sqrt_q0),
            ("epsilon", m.epsilon),
            ("scaled_delta", m.scaled_delta),
            ("rho", m.rho),
        ];
        let mut csv = String::from("quantity,value\n");
        for (k, v) in &rows {
            csv.push_str(&format!("{k},{v}\n"));
        }
        csv.push_str("note,minimax line: Delta diverges; scaled_delta = (1-alpha)*Delta\n");
        let fields: serde_json::Map<String, serde_json::Value> = rows
            .iter()
            .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
            .collect();
        let json = serde_json::json!({
            "minimax": fields,
            "note": "minimax line: Delta diverges; scaled_delta = (1-alpha)*Delta",
        });
        return Ok(("solve".into(), config, None, json, csv));
    }
    let p = ControlPoint::new(alpha, r)?;
    let report = replica::risk_report(p)?;
    let op = replica::solve_order_params(p)?;
    let hat = replica::hat_params(&op);
    let rows = vec![
        ("est_error", report.est_error),
        ("susceptibility", report.susceptibility),
        ("var_proxy", report.var_proxy),
        ("es_out_ratio", report.es_out_ratio),
        ("es_in_ratio", report.es_in_ratio),
        ("weight_mean", report.weight_mean),
        ("weight_var", report.weight_var),
        ("q0", op.q0),
        ("delta", op.delta),
        ("epsilon", op.epsilon),
        ("chi", op.chi),
        ("zeta", op.zeta),
        ("lambda", hat.lambda),
        ("delta_hat", hat.delta_hat),
        ("q0_hat", hat.q0_hat),
    ];
    let mut csv = String::from("quantity,value\n");
    for (k, v) in &rows {
        csv.push_str(&format!("{k},{v}\n"));
    }
    let json = serde_json::json!({
        "risk_report": {
            "est_error": report.est_error,
            "susceptibility": report.susceptibility,
            "var_proxy": report.var_proxy,
            "es_out_ratio": report.es_out_ratio,
            "es_in_ratio": report.es_in_ratio,
            "weight_mean": report.weight_mean,
            "weight_var": report.weight_var,
        },
        "order_params": {
            "q0": op.q0, "delta": op.delta, "epsilon": op.epsilon,
            "chi": op.chi, "zeta": op.zeta,
        },
        "hat_params": {
            "lambda": hat.lambda, "delta_hat": hat.delta_hat, "q0_hat": hat.q0_hat,
        },
    });
    Ok(("solve".into(), config, None, json, csv))
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Domain(format!(
            "grid must be LO:HI:STEP, got '{spec}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad grid number '{s}'")))
        })
        .collect::<Result<_, _>>()?;
    map::uniform_grid(nums[0], nums[1], nums[2])
}

fn parse_list(spec: &str) -> Result<Vec<f64>, Error> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad number '{s}' in list")))
        })
        .collect()
}

fn cmd_contour(metric: &str, level: f64, alpha_grid: &str, scan: usize) -> Result<CmdOutput, Error> {
    let m = Metric::parse(metric)?;
    let alphas = parse_grid(alpha_grid)?;
    let line = map::trace_contour(m, level, &alphas, scan)?;
    let config = kv(&[
        ("metric", m.name().to_string()),
        ("level", level.to_string()),
        ("alpha_grid", alpha_grid.to_string()),
        ("scan", scan.to_string()),
    ]);
    let json = serde_json::to_value(&line).expect("serializable");
    let csv = line.to_csv();
    Ok(("contour".into(), config, None, json, csv))
}

fn cmd_grid(metric: &str, alpha_grid: &str, r_grid: &str) -> Result<CmdOutput, Error> {
    let m = Metric::parse(metric)?;
    let alphas = parse_grid(alpha_grid)?;
    let rs = parse_grid(r_grid)?;
    let grid = map::evaluate_grid(m, &alphas, &rs)?;
    let config = kv(&[
        ("metric", m.name().to_string()),
        ("alpha_grid", alpha_grid.to_string()),
        ("r_grid", r_grid.to_string()),
    ]);
    let json = serde_json::to_value(&grid).expect("serializable");
    let csv = grid.to_csv();
    Ok(("grid".into(), config, None, json, csv))
}

fn cmd_table(estimator: &str, errors: &str, alphas: &str) -> Result<CmdOutput, Error> {
    let est = Estimator::parse(estimator)?;
    let errs: Vec<f64> = parse_list(errors)?.iter().map(|e| e / 100.0).collect();
    let avec = parse_list(alphas)?;
    let table = map::required_aspect_table(est, &errs, &avec)?;
    let config = kv(&[
        ("estimator", estimator.to_string()),
        ("errors_percent", errors.to_string()),
        ("alphas", alphas.to_string()),
    ]);
    let json = serde_json::to_value(&table).expect("serializable");
    let csv = table.to_csv();
    Ok(("table".into(), config, None, json, csv))
}

fn cmd_boundary(estimator: &str, alpha_grid: &str) -> Result<CmdOutput, Error> {
    let est = Estimator::parse(estimator)?;
    let alphas = parse_grid(alpha_grid)?;
    let curve = map::phase_boundary_curve(est, &alphas)?;
    let config = kv(&[
        ("estimator", estimator.to_string()),
        ("alpha_grid", alpha_grid.to_string()),
    ]);
    let json = serde_json::to_value(&curve).expect("serializable");
    let csv = curve.to_csv();
    Ok(("boundary".into(), config, None, json, csv))
}

fn parse_dist(spec: &str) -> Result<ReturnDistribution, Error> {
    let s = spec.to_ascii_lowercase();
    if s == "gaussian" {
        return Ok(ReturnDistribution::GaussianUnit);
    }
    if let Some(nu) = s.strip_prefix("student:") {
        let nu: f64 = nu
            .parse()
            .map_err(|_| Error::Domain(format!("bad Student parameter '{nu}'")))?;
        if !(nu > 2.0) {
            return Err(Error::Domain(format!(
                "Student returns require nu > 2, got {nu}"
            )));
        }
        return Ok(ReturnDistribution::Student { nu });
    }
    Err(Error::Domain(format!(
        "unknown distribution '{spec}' (expected gaussian or student:NU)"
    )))
}

fn cmd_simulate(
    dist: &str,
    n: usize,
    t: usize,
    alpha: f64,
    samples: usize,
    seed: u64,
    shift: f64,
) -> Result<CmdOutput, Error> {
    let distribution = parse_dist(dist)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "simulate requires alpha in (0,1), got {alpha}"
        )));
    }
    if n == 0 || t == 0 || samples == 0 {
        return Err(Error::Domain("N, T and samples must be positive".into()));
    }
    let spec = SampleSpec {
        n_assets: n,
        horizon: t,
        distribution,
        master_seed: seed,
    };
    let stats = simulate::run_ensemble_shifted(&spec, alpha, shift, samples)?;
    let config = kv(&[
        ("dist", distribution.to_string()),
        ("N", n.to_string()),
        ("T", t.to_string()),
        ("alpha", alpha.to_string()),
        ("samples", samples.to_string()),
        ("shift", shift.to_string()),
    ]);
    let json = stats.to_json_summary();
    let csv = stats.to_csv();
    Ok(("simulate".into(), config, Some(seed), json, csv))
}

fn cmd_parametric(alpha: f64, q0: Option<f64>, r: Option<f64>) -> Result<CmdOutput, Error> {
    let phi = parametric::phi_factor(alpha)?;
    let rc = parametric::r_crit_param(alpha)?;
    let (q0, r) = match (q0, r) {
        (Some(q0), None) => (q0, parametric::contour_r_param(alpha, q0)?),
        (None, Some(r)) => (parametric::q0_param(alpha, r)?, r),
        _ => {
            return Err(Error::Domain(
                "parametric requires exactly one of --q0 or --r".into(),
            ))
        }
    };
    let config = kv(&[
        ("alpha", alpha.to_string()),
        ("q0", q0.to_string()),
        ("r", r.to_string()),
    ]);
    let rows = vec![
        ("phi", phi),
        ("r_crit", rc),
        ("q0", q0),
        ("sqrt_q0", q0.sqrt()),
        ("est_error", q0.sqrt() - 1.0),
        ("r", r),
        ("t_over_n", if r > 0.0 { 1.0 / r } else { f64::INFINITY }),
    ];
    let mut csv = String::from("quantity,value\n");
    for (k, v) in &rows {
        csv.push_str(&format!("{k},{v}\n"));
    }
    let json = rows
        .iter()
        .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
        .collect::<serde_json::Map<_, _>>();
    Ok((
        "parametric".into(),
        config,
        None,
        serde_json::Value::Object(json),
        csv,
    ))
}
