//! Self-check suites behind `qbranch verify`. Each suite compares two
//! independent routes to the same quantity and reports the first mismatch.

use qbranch_core::fitting::{fit_gamma, model_damped, FitWindow};
use qbranch_core::numerics::{binomial_pmf, CompensatedSum};
use qbranch_core::rabi::{
    build_dp_grid, closed_pg, gamma_quadratic, trace, DistModel, DistParams, Model, ProbabilityTrace, RabiParams,
};
use qbranch_core::splitter::{
    derive_channels, stats_closed, stats_enumerate, stats_lossless_closed, stats_partition_binomial,
    stats_partition_multinomial, Convention, EfficiencySpec, OccupationStats, SplitterChannels, SplitterSpec,
};

/// Offset added to one computed value of a suite by `--inject-fault`.
pub const FAULT: f64 = 1e-6;

type Outcome = Result<(), String>;

pub struct Suite {
    pub name: &'static str,
    /// `(quick, fault)`.
    pub run: fn(bool, f64) -> Outcome,
}

pub const SUITES: &[Suite] = &[
    Suite { name: "splitter-lossless", run: splitter_lossless },
    Suite { name: "splitter-lossy", run: splitter_lossy },
    Suite { name: "splitter-channels", run: splitter_channels },
    Suite { name: "binomial-normalization", run: binomial_normalization },
    Suite { name: "closed-reduction", run: closed_reduction },
    Suite { name: "depth-one", run: depth_one },
    Suite { name: "dist-recursion", run: dist_recursion },
    Suite { name: "quadratic-law", run: quadratic_law },
    Suite { name: "fit-recovery", run: fit_recovery },
    Suite { name: "probability-range", run: probability_range },
];

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn ensure(ok: bool, detail: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(detail())
    }
}

fn perturbed(mut s: OccupationStats, fault: f64) -> OccupationStats {
    s.mean_r += fault;
    s
}

fn photon_range(quick: bool) -> std::ops::RangeInclusive<usize> {
    if quick {
        1..=6
    } else {
        1..=12
    }
}

fn reflect_grid(quick: bool) -> Vec<f64> {
    if quick {
        vec![0.1, 0.5, 0.9]
    } else {
        (1..=9).map(|i| i as f64 / 10.0).collect()
    }
}

fn splitter_lossless(quick: bool, fault: f64) -> Outcome {
    for n in photon_range(quick) {
        for r in reflect_grid(quick) {
            let spec = SplitterSpec::from_reflect(r).map_err(err)?;
            let closed = perturbed(stats_lossless_closed(n, &spec).map_err(err)?, fault);
            let binom = stats_partition_binomial(n, &spec).map_err(err)?;
            let brute = stats_enumerate(n, &spec.as_channels()).map_err(err)?;
            let multi = stats_partition_multinomial(n, &spec.as_channels()).map_err(err)?;
            for (label, other, tol) in
                [("binomial", binom, 1e-10), ("enumerate", brute, 1e-10), ("multinomial", multi, 1e-10)]
            {
                let d = closed.max_rel_diff(&other);
                ensure(d < tol, || format!("closed vs {label} at n={n} R={r}: {d:e}"))?;
            }
            let d = multi.max_rel_diff(&binom);
            ensure(d < 1e-12, || format!("multinomial vs binomial at n={n} R={r}: {d:e}"))?;
        }
    }
    Ok(())
}

fn splitter_lossy(quick: bool, fault: f64) -> Outcome {
    for n in photon_range(quick) {
        for r in reflect_grid(quick) {
            for loss in [0.15, 0.3] {
                let c = SplitterChannels::new(r * (1.0 - loss), (1.0 - r) * (1.0 - loss), loss).map_err(err)?;
                let multi = perturbed(stats_partition_multinomial(n, &c).map_err(err)?, fault);
                let brute = stats_enumerate(n, &c).map_err(err)?;
                let closed = stats_closed(n, &c).map_err(err)?;
                let d = multi.max_rel_diff(&brute).max(multi.max_rel_diff(&closed));
                ensure(d < 1e-10, || format!("n={n} R={r} loss={loss}: {d:e}"))?;
            }
        }
    }
    Ok(())
}

/// Channel normalization and the unequal lossy variances `n R'(T' + L)` and `n T'(R' + L)`.
fn splitter_channels(quick: bool, fault: f64) -> Outcome {
    let steps = if quick { 3 } else { 6 };
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    for &r in &grid {
        for &eps_r in &grid {
            for &eps_t in &grid {
                for &w_b in &grid {
                    for convention in [Convention::AllPrepared, Convention::ScatteredOnly] {
                        let spec = SplitterSpec::from_reflect(r).map_err(err)?;
                        let eff = EfficiencySpec::new(eps_r, eps_t, w_b).map_err(err)?;
                        let c = derive_channels(&spec, &eff, convention).map_err(err)?;
                        let total = c.r_eff + c.t_eff + c.loss;
                        ensure((total - 1.0).abs() < 1e-12, || format!("channels sum to {total} at {spec:?} {eff:?}"))?;
                    }
                }
            }
        }
    }
    let spec = SplitterSpec::from_reflect(0.5).map_err(err)?;
    let eff = EfficiencySpec::new(0.1, 0.2, 1.0).map_err(err)?;
    let c = derive_channels(&spec, &eff, Convention::ScatteredOnly).map_err(err)?;
    for n in photon_range(quick) {
        let s = stats_partition_multinomial(n, &c).map_err(err)?;
        let nf = n as f64;
        let var_r = nf * c.r_eff * (c.t_eff + c.loss) + fault;
        let var_t = nf * c.t_eff * (c.r_eff + c.loss);
        ensure((s.var_r - var_r).abs() < 1e-12 * nf && (s.var_t - var_t).abs() < 1e-12 * nf, || {
            format!("n={n}: var_r {} vs {var_r}, var_t {} vs {var_t}", s.var_r, s.var_t)
        })?;
        ensure((s.var_r - s.var_t).abs() > 1e-3, || format!("n={n}: lossy variances coincide"))?;
    }
    Ok(())
}

fn binomial_normalization(quick: bool, fault: f64) -> Outcome {
    let sizes: &[u64] = if quick { &[0, 1, 7, 333] } else { &[0, 1, 7, 333, 1000, 10_000] };
    for &n in sizes {
        for beta in [0.0, 0.001, 0.5, 0.995, 1.0] {
            let mut total = CompensatedSum::new();
            for k in 0..=n {
                total.add(binomial_pmf(n, k, beta).map_err(err)?);
            }
            let total = total.value() + fault;
            ensure((total - 1.0).abs() < 1e-12, || format!("n={n} beta={beta}: sum {total}"))?;
        }
    }
    Ok(())
}

const REDUCTION_SETS: [(f64, f64); 5] = [(1.0, 0.7), (0.3, 0.05), (2.5, 0.013), (1.0, 1.0), (4.0, 0.08)];

fn closed_reduction(quick: bool, fault: f64) -> Outcome {
    let nodes = if quick { 60 } else { 200 };
    for (omega, dt) in REDUCTION_SETS {
        let grid = build_dp_grid(&RabiParams::new(omega, dt, 1.0).map_err(err)?, 5, nodes).map_err(err)?;
        let dist = DistModel::new(DistParams::new(omega, dt, 1.0).map_err(err)?, nodes as f64 * dt).map_err(err)?;
        for k in 0..=nodes {
            let t = k as f64 * dt;
            let exact = closed_pg(omega, t);
            for j in 0..=5 {
                let got = grid.pg[j][k] + fault;
                ensure((got - exact).abs() < 1e-10, || {
                    format!("indist depth {j}, omega={omega} t={t}: {got} vs {exact}")
                })?;
            }
            let got = dist.pg(t).map_err(err)?;
            ensure((got - exact).abs() < 1e-10, || format!("dist omega={omega} t={t}: {got} vs {exact}"))?;
        }
    }
    Ok(())
}

fn s2(x: f64) -> f64 {
    x.sin().powi(2)
}

fn c2(x: f64) -> f64 {
    x.cos().powi(2)
}

fn plain_binomial(n: usize, k: usize, beta: f64) -> f64 {
    let c: f64 = (0..k).map(|i| (n - i) as f64 / (i + 1) as f64).product();
    c * beta.powi(k as i32) * (1.0 - beta).powi((n - k) as i32)
}

fn depth_one(quick: bool, fault: f64) -> Outcome {
    let n_max = if quick { 40 } else { 100 };
    for (omega, dt, beta) in [(1.0, 0.7, 0.995), (0.8, 0.05, 0.9), (2.0, 0.11, 0.5)] {
        let grid = build_dp_grid(&RabiParams::new(omega, dt, beta).map_err(err)?, 1, n_max).map_err(err)?;
        for n in 0..=n_max {
            let direct: f64 = (0..=n)
                .map(|k| {
                    let (a, b) = (omega * k as f64 * dt, omega * (n - k) as f64 * dt);
                    plain_binomial(n, k, beta) * (s2(a) * c2(b) + c2(a) * s2(b))
                })
                .sum();
            let got = grid.pg[1][n] + fault;
            ensure((got - direct).abs() < 1e-12, || {
                format!("omega={omega} dt={dt} beta={beta} n={n}: {got} vs {direct}")
            })?;
        }
    }
    Ok(())
}

fn dist_naive(omega: f64, dt: f64, eta: f64, j: usize, t: f64) -> f64 {
    if j == 0 {
        return s2(omega * t);
    }
    let handed = dist_naive(omega, dt, eta, j - 1, j as f64 * dt);
    let tau = t - j as f64 * dt;
    eta * dist_naive(omega, dt, eta, j - 1, t)
        + (1.0 - eta) * (handed * c2(omega * tau) + (1.0 - handed) * s2(omega * tau))
}

fn dist_recursion(quick: bool, fault: f64) -> Outcome {
    let (omega, dt, eta) = (1.1, 0.3, 0.8);
    let t_end = if quick { 2.4 } else { 4.0 };
    let model = DistModel::new(DistParams::new(omega, dt, eta).map_err(err)?, t_end).map_err(err)?;
    let steps = (t_end * 10.0).round() as usize;
    for i in 0..=steps {
        let t = i as f64 * 0.1;
        let expected = dist_naive(omega, dt, eta, (t / dt).floor() as usize, t);
        let got = model.pg(t).map_err(err)? + fault;
        ensure((got - expected).abs() < 1e-12, || format!("t={t}: {got} vs {expected}"))?;
    }
    Ok(())
}

fn quadratic_law(quick: bool, fault: f64) -> Outcome {
    let cases: &[(f64, f64)] = if quick {
        &[(0.995, 0.02)]
    } else {
        &[(0.99, 0.01), (0.99, 0.02), (0.99, 0.05), (0.995, 0.01), (0.995, 0.02), (0.995, 0.05)]
    };
    for &(beta, phase) in cases {
        let params = RabiParams::new(1.0, phase, beta).map_err(err)?;
        let expected = gamma_quadratic(&params);
        let t_max = 2.0 / expected;
        let samples = (t_max / std::f64::consts::PI * 20.0) as usize;
        let tr = trace(&Model::Approx { params }, t_max, samples).map_err(err)?;
        let fit = fit_gamma(&tr, 1.0, FitWindow::new(0.0, t_max).map_err(err)?, 10.0 * expected).map_err(err)?;
        let rel = (fit.gamma / expected - 1.0).abs() + fault * 1e6;
        ensure(fit.converged && rel < 0.1, || {
            format!("beta={beta} omega*dt={phase}: gamma {} vs {expected}", fit.gamma)
        })?;
    }
    Ok(())
}

fn fit_recovery(quick: bool, fault: f64) -> Outcome {
    let ratios: &[f64] = if quick { &[0.01, 0.1] } else { &[0.001, 0.003, 0.01, 0.039, 0.1, 0.2] };
    for &ratio in ratios {
        let t_max = 40.0;
        let samples: Vec<(f64, f64)> = (0..800)
            .map(|i| {
                let t = i as f64 * t_max / 799.0;
                (t, model_damped(1.0, ratio, t))
            })
            .collect();
        let tr = ProbabilityTrace::new(samples).map_err(err)?;
        let fit = fit_gamma(&tr, 1.0, FitWindow::new(0.0, t_max).map_err(err)?, 1.0).map_err(err)?;
        let got = fit.gamma + fault;
        ensure((got / ratio - 1.0).abs() < 1e-6, || format!("gamma/omega {ratio}: recovered {got}"))?;
    }
    Ok(())
}

fn probability_range(quick: bool, fault: f64) -> Outcome {
    let samples = if quick { 100 } else { 400 };
    let rabi = RabiParams::new(1.0, 0.7, 0.995).map_err(err)?;
    let dist = DistParams::new(1.0, 0.08, 0.99).map_err(err)?;
    for model in [
        Model::Closed { omega: 1.0 },
        Model::Indist { params: rabi, depth: 5 },
        Model::Approx { params: rabi },
        Model::Dist { params: dist },
    ] {
        let tr = trace(&model, 40.0, samples).map_err(err)?;
        for &(t, p) in &tr.samples {
            let p = p + fault * 2e6;
            ensure((0.0..=1.0).contains(&p), || format!("{model:?} at t={t}: p_g = {p}"))?;
        }
    }
    Ok(())
}
