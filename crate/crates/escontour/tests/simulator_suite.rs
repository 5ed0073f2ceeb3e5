//! Simulator-level verification: the LP optimum against quantile structure,
//! the weight distribution against the theory, shift mechanics, and the
//! reproducibility contracts.

use escontour::replica::{self, ControlPoint};
use escontour::simulate::*;
use escontour::specfun::norm_cdf;

fn gauss(n: usize, t: usize, seed: u64) -> SampleSpec {
    SampleSpec {
        n_assets: n,
        horizon: t,
        distribution: ReturnDistribution::GaussianUnit,
        master_seed: seed,
    }
}

fn portfolio_losses(x: &SampleMatrix, w: &[f64]) -> Vec<f64> {
    (0..x.horizon)
        .map(|t| -(0..x.n_assets).map(|i| x.at(i, t) * w[i]).sum::<f64>())
        .collect()
}

#[test]
fn epsilon_hat_is_an_alpha_quantile_of_the_losses() {
    // vertex optimality pins eps between the order statistics around the
    // alpha quantile: #{loss > eps} <= (1-alpha)T <= #{loss >= eps}
    for (n, t, alpha, seed) in [
        (5usize, 200usize, 0.9, 3u64),
        (10, 400, 0.975, 4),
        (8, 120, 0.7, 5),
    ] {
        let spec = gauss(n, t, seed);
        for idx in 0..5u64 {
            let x = generate_returns(&spec, idx).unwrap();
            let sol = solve_es_lp(&x, alpha).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            let losses = portfolio_losses(&x, &sol.weights);
            let tol = 1e-7;
            let above = losses.iter().filter(|&&l| l > sol.epsilon_hat + tol).count() as f64;
            let at_or_above = losses
                .iter()
                .filter(|&&l| l >= sol.epsilon_hat - tol)
                .count() as f64;
            let budget = (1.0 - alpha) * t as f64;
            assert!(
                above <= budget + 1e-9 && budget <= at_or_above + 1e-9,
                "quantile sandwich failed: {above} <= {budget} <= {at_or_above}"
            );
        }
    }
}

#[test]
fn pooled_weights_follow_gaussian_with_replica_variance() {
    // deep in the feasible region the weight sample pooled over samples is
    // Normal(1, q0 - 1); Kolmogorov-Smirnov at the 1% level
    let (n, t, alpha) = (50usize, 2500usize, 0.9);
    let spec = gauss(n, t, 2);
    let q0 = replica::solve_order_params(ControlPoint::new(alpha, n as f64 / t as f64).unwrap())
        .unwrap()
        .q0;
    let sigma = (q0 - 1.0).sqrt();
    let mut pooled = Vec::with_capacity(100 * n);
    for idx in 0..100u64 {
        let x = generate_returns(&spec, idx).unwrap();
        let sol = solve_es_lp(&x, alpha).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        pooled.extend_from_slice(&sol.weights);
    }
    pooled.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let m = pooled.len() as f64;
    let mut d = 0.0f64;
    for (k, w) in pooled.iter().enumerate() {
        let f = norm_cdf((w - 1.0) / sigma);
        d = d.max((f - k as f64 / m).abs());
        d = d.max(((k + 1) as f64 / m - f).abs());
    }
    // asymptotic 1% critical value of the KS statistic
    let crit = 1.6276 / m.sqrt();
    assert!(d < crit, "KS statistic {d:.4} exceeds 1% critical {crit:.4}");
}

#[test]
fn student_tails_thicken_with_sample_size() {
    // nu = 3 has no fourth moment: the empirical excess kurtosis grows
    // without bound as the panel grows
    let kurt = |data: &[f64]| {
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let m2 = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m4 = data.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        m4 / (m2 * m2) - 3.0
    };
    let small = SampleSpec {
        n_assets: 100,
        horizon: 100,
        distribution: ReturnDistribution::Student { nu: 3.0 },
        master_seed: 9,
    };
    let big = SampleSpec {
        n_assets: 100,
        horizon: 10_000,
        ..small
    };
    let k_small = kurt(&generate_returns(&small, 0).unwrap().data);
    let k_big = kurt(&generate_returns(&big, 0).unwrap().data);
    assert!(k_small > 1.0, "nu=3 panel should be leptokurtic: {k_small}");
    assert!(
        k_big > 2.0 * k_small,
        "kurtosis should grow with size: {k_small} -> {k_big}"
    );
    // Gaussian control stays near zero
    let g = gauss(100, 10_000, 9);
    let k_gauss = kurt(&generate_returns(&g, 0).unwrap().data);
    assert!(k_gauss.abs() < 0.2, "gaussian kurtosis {k_gauss}");
}

#[test]
fn sample_metrics_hand_values() {
    let spec = gauss(2, 4, 0);
    let sol = EsLpSolution {
        status: LpStatus::Optimal,
        weights: vec![1.0, 1.0],
        epsilon_hat: 0.5,
        slacks: vec![0.0; 4],
        objective: 1.0,
        degenerate: false,
        iterations: 0,
    };
    let m = sample_metrics(&sol, &spec, 0.9).unwrap();
    assert_eq!(m.q0_hat, 1.0);
    assert_eq!(m.est_error_hat, 0.0);
    let sol2 = EsLpSolution {
        weights: vec![2.0, 0.0],
        ..sol
    };
    let m2 = sample_metrics(&sol2, &spec, 0.9).unwrap();
    assert_eq!(m2.q0_hat, 2.0);
    // unbounded input rejected
    let bad = EsLpSolution {
        status: LpStatus::Unbounded,
        ..sol2
    };
    assert!(sample_metrics(&bad, &spec, 0.9).is_err());
}

#[test]
fn ensemble_mean_matches_replica_at_spec_point() {
    // alpha = 0.975, N = 50, T = 2000, 200 samples: the ensemble mean of
    // the relative error agrees with the saddle-point value within 3
    // standard errors
    let spec = gauss(50, 2000, 1);
    let stats = run_ensemble(&spec, 0.975, 200).unwrap();
    let rep = replica::risk_report(ControlPoint::new(0.975, 0.025).unwrap()).unwrap();
    let z = (stats.est_error.mean - rep.est_error) / stats.est_error.stderr;
    assert!(z.abs() <= 3.0, "z = {z:.2}");
}

#[test]
fn ensemble_width_shrinks_with_portfolio_size() {
    // same r, doubled N: the est_error distribution must sharpen
    let alpha = 0.975;
    let small = run_ensemble(&gauss(10, 400, 6), alpha, 250).unwrap();
    let big = run_ensemble(&gauss(20, 800, 6), alpha, 250).unwrap();
    assert!(
        big.est_error.std < small.est_error.std,
        "width must decrease: {} -> {}",
        small.est_error.std,
        big.est_error.std
    );
}

#[test]
fn feasibility_monotone_under_common_random_numbers() {
    // alpha ~ 1, N = 12: nested scenario prefixes make per-sample
    // feasibility monotone, so the fractions are ordered exactly
    let alpha = 1.0 - 1e-6;
    let mut prev = 1.1;
    let mut fractions = Vec::new();
    for t in [60usize, 24, 15] {
        let f = feasibility_probability(&gauss(12, t, 17), alpha, 600).unwrap();
        fractions.push(f);
        assert!(f <= prev, "feasibility must not increase with r: {fractions:?}");
        prev = f;
    }
    assert!(fractions[0] > 0.95, "deep region: {fractions:?}");
    assert!(fractions[2] < 0.2, "past the minimax point: {fractions:?}");
}

#[test]
fn shift_is_absorbed_by_the_var_level() {
    // a uniform return shift leaves the optimal weights untouched and moves
    // eps by exactly -N*xi: the budget constraint absorbs it. The
    // susceptibility finite difference therefore measures zero.
    let spec = gauss(15, 300, 8);
    let xi = 1e-3;
    for idx in 0..4u64 {
        let x = generate_returns(&spec, idx).unwrap();
        let up = solve_es_lp(&x.shifted(xi), 0.9).unwrap();
        let dn = solve_es_lp(&x.shifted(-xi), 0.9).unwrap();
        for (a, b) in up.weights.iter().zip(dn.weights.iter()) {
            assert!((a - b).abs() < 1e-7, "weights must be shift-invariant");
        }
        let slope = (up.epsilon_hat - dn.epsilon_hat) / (2.0 * xi);
        assert!(
            (slope + 15.0).abs() < 1e-4,
            "d eps/d xi = {slope}, expected -N"
        );
    }
    let fd = susceptibility_fd(&spec, 0.9, xi, 30).unwrap();
    assert_eq!(fd.n_pairs, 30);
    assert!(
        fd.value.abs() < 1e-6,
        "finite-difference susceptibility should vanish, got {}",
        fd.value
    );
    // determinism contract: identical reruns agree bit for bit
    let fd2 = susceptibility_fd(&spec, 0.9, xi, 30).unwrap();
    assert_eq!(fd.value, fd2.value);
    // deep r -> 0 proxy: still zero
    let fd3 = susceptibility_fd(&gauss(4, 600, 8), 0.9, xi, 10).unwrap();
    assert!(fd3.value.abs() < 1e-6);
}

#[test]
fn ensemble_csv_and_summary_are_deterministic() {
    let spec = gauss(6, 80, 33);
    let a = run_ensemble(&spec, 0.85, 25).unwrap();
    let b = run_ensemble(&spec, 0.85, 25).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(
        a.to_json_summary().to_string(),
        b.to_json_summary().to_string()
    );
    assert!(a.to_csv().starts_with(
        "index,status,q0_hat,est_error_hat,epsilon_hat,es_in_ratio\n"
    ));
}
