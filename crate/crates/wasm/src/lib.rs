//! Browser bindings: sample a trace, fit its damping rate, and compute
//! splitter statistics. Results cross the boundary as flat `f64` arrays.

use qbranch_core::fitting::{fit_gamma, FitWindow};
use qbranch_core::rabi::{trace, DistParams, Model, ProbabilityTrace, RabiParams};
use qbranch_core::splitter::{derive_channels, stats_partition_multinomial, Convention, EfficiencySpec, SplitterSpec};
use qbranch_core::Result;
use wasm_bindgen::prelude::*;

fn model_for(kind: &str, omega: f64, dt: f64, weight: f64, depth: usize) -> Result<Model> {
    Ok(match kind {
        "closed" => Model::Closed { omega },
        "indist" => Model::Indist { params: RabiParams::new(omega, dt, weight)?, depth },
        "approx" => Model::Approx { params: RabiParams::new(omega, dt, weight)? },
        "dist" => Model::Dist { params: DistParams::new(omega, dt, weight)? },
        other => return Err(qbranch_core::Error::Domain(format!("unknown model `{other}`"))),
    })
}

/// `[t0, p0, t1, p1, ...]`.
pub fn sample_trace(
    kind: &str,
    omega: f64,
    dt: f64,
    weight: f64,
    depth: usize,
    t_max: f64,
    samples: usize,
) -> Result<Vec<f64>> {
    let tr = trace(&model_for(kind, omega, dt, weight, depth)?, t_max, samples)?;
    Ok(tr.samples.iter().flat_map(|&(t, p)| [t, p]).collect())
}

/// `[gamma, gamma / omega, rms, converged (0 or 1)]` for interleaved `(t, p)` pairs.
pub fn fit_pairs(pairs: &[f64], omega: f64, t_max: f64) -> Result<Vec<f64>> {
    let samples = pairs.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let fit = fit_gamma(&ProbabilityTrace::new(samples)?, omega, FitWindow::new(0.0, t_max)?, omega)?;
    Ok(vec![fit.gamma, fit.gamma_over_omega(), fit.rms, f64::from(u8::from(fit.converged))])
}

/// `[r_eff, t_eff, loss, mean_r, mean_t, mean_rt, var_r, var_t, cov_rt]`.
pub fn splitter_summary(n: usize, reflect: f64, eps_r: f64, eps_t: f64, w_b: f64, scattered: bool) -> Result<Vec<f64>> {
    let convention = if scattered { Convention::ScatteredOnly } else { Convention::AllPrepared };
    let c =
        derive_channels(&SplitterSpec::from_reflect(reflect)?, &EfficiencySpec::new(eps_r, eps_t, w_b)?, convention)?;
    let mut out = vec![c.r_eff, c.t_eff, c.loss];
    out.extend(stats_partition_multinomial(n, &c)?.as_array());
    Ok(out)
}

fn to_js<T>(r: Result<T>) -> std::result::Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = rabiTrace)]
pub fn rabi_trace(
    kind: &str,
    omega: f64,
    dt: f64,
    weight: f64,
    depth: usize,
    t_max: f64,
    samples: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    to_js(sample_trace(kind, omega, dt, weight, depth, t_max, samples))
}

#[wasm_bindgen(js_name = fitDamping)]
pub fn fit_damping(pairs: &[f64], omega: f64, t_max: f64) -> std::result::Result<Vec<f64>, JsError> {
    to_js(fit_pairs(pairs, omega, t_max))
}

#[wasm_bindgen(js_name = splitterStats)]
pub fn splitter_stats(
    n: usize,
    reflect: f64,
    eps_r: f64,
    eps_t: f64,
    w_b: f64,
    scattered: bool,
) -> std::result::Result<Vec<f64>, JsError> {
    to_js(splitter_summary(n, reflect, eps_r, eps_t, w_b, scattered))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_then_fit() {
        let pairs = sample_trace("indist", 1.0, 0.7, 0.995, 5, 40.0, 401).unwrap();
        assert_eq!(pairs.len(), 802);
        let fit = fit_pairs(&pairs, 1.0, 40.0).unwrap();
        assert!((fit[1] - 0.039).abs() <= 0.005);
        assert_eq!(fit[3], 1.0);
    }

    #[test]
    fn splitter_row() {
        let row = splitter_summary(5, 0.5, 0.1, 0.2, 1.0, true).unwrap();
        assert!((row[0] - 0.45).abs() < 1e-15 && (row[1] - 0.4).abs() < 1e-15);
        assert!((row[6] - 5.0 * 0.45 * 0.55).abs() < 1e-12);
    }

    #[test]
    fn bad_model_is_an_error() {
        assert!(sample_trace("quantum", 1.0, 0.1, 0.9, 5, 1.0, 10).is_err());
    }
}
