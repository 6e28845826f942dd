use qbranch_core::fitting::{fit_gamma, FitWindow};
use qbranch_core::rabi::{
    build_dp_grid, build_dp_grid_with, closed_pg, freq_ladder, gamma_quadratic, trace, DistModel, DistParams,
    DpOptions, IndistModel, Model, RabiParams,
};

fn s2(x: f64) -> f64 {
    x.sin().powi(2)
}

fn c2(x: f64) -> f64 {
    x.cos().powi(2)
}

/// Binomial weights by plain floating-point products, independent of the
/// log-space path.
fn plain_binomial(n: usize, k: usize, beta: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c * beta.powi(k as i32) * (1.0 - beta).powi((n - k) as i32)
}

fn one_event_direct(omega: f64, dt: f64, beta: f64, n: usize) -> f64 {
    (0..=n)
        .map(|k| {
            let (a, b) = (omega * k as f64 * dt, omega * (n - k) as f64 * dt);
            plain_binomial(n, k, beta) * (s2(a) * c2(b) + c2(a) * s2(b))
        })
        .sum()
}

#[test]
fn depth_one_row_matches_direct_sum() {
    for (omega, dt, beta) in [(1.0, 0.7, 0.995), (0.8, 0.05, 0.9), (2.0, 0.11, 0.5)] {
        let params = RabiParams::new(omega, dt, beta).unwrap();
        let grid = build_dp_grid(&params, 1, 100).unwrap();
        for n in 0..=100 {
            let direct = one_event_direct(omega, dt, beta, n);
            assert!((grid.pg[1][n] - direct).abs() < 1e-12, "n={n}");
        }
    }
}

#[test]
fn four_step_hand_expansion() {
    let (omega, dt, beta) = (1.3, 0.37, 0.8);
    let params = RabiParams::new(omega, dt, beta).unwrap();
    let grid = build_dp_grid(&params, 1, 4).unwrap();
    let w = |k: f64| omega * k * dt;
    let b = |k| plain_binomial(4, k, beta);
    let expected = b(4) * (s2(w(4.0)) * c2(w(0.0)) + c2(w(4.0)) * s2(w(0.0)))
        + b(3) * (s2(w(3.0)) * c2(w(1.0)) + c2(w(3.0)) * s2(w(1.0)))
        + b(2) * (s2(w(2.0)) * c2(w(2.0)) + c2(w(2.0)) * s2(w(2.0)))
        + b(1) * (s2(w(1.0)) * c2(w(3.0)) + c2(w(1.0)) * s2(w(3.0)))
        + b(0) * (s2(w(0.0)) * c2(w(4.0)) + c2(w(0.0)) * s2(w(4.0)));
    assert!((grid.pg[1][4] - expected).abs() < 1e-12);
}

/// Runs the ground and excited recursions as two separate tables, each term
/// built with the sin^2/cos^2 exchange rule, and checks `P_e = 1 - P_g`.
#[test]
fn excited_table_is_complement() {
    for (omega, dt, beta) in [(1.0, 0.7, 0.995), (1.7, 0.13, 0.6), (0.4, 0.9, 0.3)] {
        let n_max = 50;
        let depth = 3;
        let step = |m: usize| omega * m as f64 * dt;
        let mut g = vec![(0..=n_max).map(|m| s2(step(m))).collect::<Vec<_>>()];
        let mut e = vec![(0..=n_max).map(|m| c2(step(m))).collect::<Vec<_>>()];
        for j in 1..=depth {
            let (gp, ep) = (&g[j - 1], &e[j - 1]);
            let mut gr = vec![0.0; n_max + 1];
            let mut er = vec![0.0; n_max + 1];
            for n in 0..=n_max {
                for k in 0..=n {
                    let w = plain_binomial(n, k, beta);
                    gr[n] += w * (gp[k] * c2(step(n - k)) + ep[k] * s2(step(n - k)));
                    er[n] += w * (ep[k] * c2(step(n - k)) + gp[k] * s2(step(n - k)));
                }
            }
            g.push(gr);
            e.push(er);
        }
        let params = RabiParams::new(omega, dt, beta).unwrap();
        let grid = build_dp_grid(&params, depth, n_max).unwrap();
        for j in 0..=depth {
            for n in 0..=n_max {
                assert!((grid.pg[j][n] - g[j][n]).abs() < 1e-12);
                assert!((1.0 - grid.pg[j][n] - e[j][n]).abs() < 1e-12);
                assert!((0.0..=1.0).contains(&grid.pg[j][n]));
            }
        }
    }
}

#[test]
fn tail_truncation_is_harmless() {
    let params = RabiParams::new(1.0, 0.02, 0.995).unwrap();
    let cut = build_dp_grid(&params, 5, 800).unwrap();
    let full = build_dp_grid_with(&params, 5, 800, DpOptions { full_sums: true, ..DpOptions::default() }).unwrap();
    for j in 0..=5 {
        for n in 0..=800 {
            assert!((cut.pg[j][n] - full.pg[j][n]).abs() < 1e-14);
        }
    }
}

#[test]
fn isolated_models_are_closed() {
    for (omega, dt) in [(1.0, 0.7), (0.3, 0.05), (2.5, 0.013), (1.0, 1.0), (4.0, 0.08)] {
        let params = RabiParams::new(omega, dt, 1.0).unwrap();
        let grid = build_dp_grid(&params, 5, 200).unwrap();
        for j in 0..=5 {
            for k in 0..=200 {
                assert!((grid.pg[j][k] - closed_pg(omega, k as f64 * dt)).abs() < 1e-10);
            }
        }
        let dist = DistModel::new(DistParams::new(omega, dt, 1.0).unwrap(), 200.0 * dt).unwrap();
        for k in 0..=200 {
            let t = k as f64 * dt;
            assert!((dist.pg(t).unwrap() - closed_pg(omega, t)).abs() < 1e-10);
        }
    }
}

/// Direct evaluation of the distinguishable recursion by nested recursion,
/// exponential in the node count and only usable for a handful of nodes.
fn dist_recursive(omega: f64, dt: f64, eta: f64, j: usize, t: f64) -> f64 {
    if j == 0 {
        return s2(omega * t);
    }
    let a = dist_recursive(omega, dt, eta, j - 1, j as f64 * dt);
    let tau = t - j as f64 * dt;
    eta * dist_recursive(omega, dt, eta, j - 1, t) + (1.0 - eta) * (a * c2(omega * tau) + (1.0 - a) * s2(omega * tau))
}

#[test]
fn dist_table_matches_naive_recursion() {
    let (omega, dt, eta) = (1.1, 0.3, 0.8);
    let model = DistModel::new(DistParams::new(omega, dt, eta).unwrap(), 4.0).unwrap();
    for i in 0..=40 {
        let t = i as f64 * 0.1;
        let n = (t / dt).floor() as usize;
        let expected = dist_recursive(omega, dt, eta, n, t);
        assert!((model.pg(t).unwrap() - expected).abs() < 1e-12, "t={t}");
    }
}

fn local_maxima(values: &[f64]) -> Vec<f64> {
    values.windows(3).filter(|w| w[1] >= w[0] && w[1] > w[2]).map(|w| w[1]).collect()
}

/// Checked in the figure regimes (beta near 1, a few tens of periods). With
/// smaller beta or much longer spans the finite-depth model shows revivals.
#[test]
fn indist_envelope_decays() {
    let mut cases = vec![(1.0, 0.7, 0.995, 40.0)];
    for level in 0..=6 {
        let omega = freq_ladder(1.0, level) / freq_ladder(1.0, 0);
        cases.push((omega, 0.2, 0.995, 8.0 * std::f64::consts::PI / omega));
    }
    for (omega, dt, beta, t_max) in cases {
        let params = RabiParams::new(omega, dt, beta).unwrap();
        let model = IndistModel::new(params, 5, t_max).unwrap();
        let maxima = local_maxima(model.grid().row(5));
        assert!(maxima.len() >= 4);
        for pair in maxima.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-6, "omega={omega}: {pair:?}");
        }
    }
}

#[test]
fn approx_matches_quadratic_rate() {
    for beta in [0.99, 0.995] {
        for phase in [0.01, 0.02, 0.05] {
            let params = RabiParams::new(1.0, phase, beta).unwrap();
            let expected = gamma_quadratic(&params);
            let t_max = 2.0 / expected;
            let samples = (t_max / std::f64::consts::PI * 20.0) as usize;
            let tr = trace(&Model::Approx { params }, t_max, samples).unwrap();
            let fit = fit_gamma(&tr, 1.0, FitWindow::new(0.0, t_max).unwrap(), 10.0 * expected).unwrap();
            assert!(fit.converged);
            assert!((fit.gamma / expected - 1.0).abs() < 0.1, "beta={beta} phase={phase}: {}", fit.gamma);
        }
    }
    let short = RabiParams::new(1.0, 0.02, 0.99).unwrap();
    let tr = trace(&Model::Approx { params: short }, 200.0, 4001).unwrap();
    let fit = fit_gamma(&tr, 1.0, FitWindow::new(0.0, 200.0).unwrap(), 1.0).unwrap();
    assert!((fit.gamma / gamma_quadratic(&short) - 1.0).abs() < 0.1);
}

#[test]
fn traces_are_probabilities() {
    let rabi = RabiParams::new(1.0, 0.7, 0.995).unwrap();
    let dist = DistParams::new(1.0, 0.08, 0.99).unwrap();
    for model in [
        Model::Closed { omega: 1.0 },
        Model::Indist { params: rabi, depth: 5 },
        Model::Approx { params: rabi },
        Model::Dist { params: dist },
    ] {
        let tr = trace(&model, 40.0, 400).unwrap();
        assert_eq!(tr.len(), 400);
        assert!(tr.samples.iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
        assert_eq!(tr.samples.last().unwrap().0, 40.0);
    }
}
