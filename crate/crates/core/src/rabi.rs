//! Ground-state Born probabilities for a two-level system prepared in the
//! excited state and subject to regularly spaced interference events.
//!
//! Models:
//!
//! * closed: `sin^2(omega t)`;
//! * indistinguishable ensemble: branch weights from the binomial
//!   distribution, evaluated by a dynamic program over (depth, step) and
//!   mapped back to continuous time with `n = t / (beta dt)`;
//! * truncated analytic approximation of the indistinguishable model;
//! * distinguishable ensemble: per-node garbling with survival probability `eta`.
//!
//! Everywhere the excited-state probability is `1 - p_g`. That the exchange of
//! `sin^2` and `cos^2` in the recursion gives exactly the complement follows by
//! induction, and the test suite checks it against a second table.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, check_probability, check_time, Error, Result};
use crate::numerics::{complex_real_power, laguerre_gen, log_binomial_pmf, CompensatedSum};

/// Default number of nested interference events.
pub const DEFAULT_DEPTH: usize = 5;

/// Binomial terms below this fraction of the row maximum are dropped.
pub const TAIL_CUTOFF: f64 = 1e-18;

/// Default guard on `depth * n_max^2` for the dynamic program.
pub const DEFAULT_GRID_BUDGET: u64 = 20_000_000_000;

/// Default guard on the node count of the distinguishable model.
pub const DEFAULT_MAX_NODES: usize = 50_000;

/// Lamb-Dicke parameter of the trapped-ion frequency ladder.
pub const LAMB_DICKE: f64 = 0.202;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    pub omega: f64,
    pub delta_t: f64,
    /// Probability that a randomly chosen interval precedes an interference event.
    pub beta: f64,
}

impl RabiParams {
    pub fn new(omega: f64, delta_t: f64, beta: f64) -> Result<Self> {
        check_positive("omega", omega)?;
        check_positive("delta_t", delta_t)?;
        check_probability("beta", beta)?;
        if beta == 0.0 {
            return Err(Error::domain("beta must be > 0 for the time rescaling"));
        }
        Ok(Self { omega, delta_t, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistParams {
    pub omega: f64,
    pub delta_t: f64,
    /// Probability that a member is NOT perturbed at a node time.
    pub eta: f64,
}

impl DistParams {
    pub fn new(omega: f64, delta_t: f64, eta: f64) -> Result<Self> {
        check_positive("omega", omega)?;
        check_positive("delta_t", delta_t)?;
        check_probability("eta", eta)?;
        Ok(Self { omega, delta_t, eta })
    }
}

/// Options for [`build_dp_grid_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    /// Sum every binomial term instead of truncating the tails.
    pub full_sums: bool,
    pub budget: u64,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self { full_sums: false, budget: DEFAULT_GRID_BUDGET }
    }
}

/// Ground-state probabilities `P^(j)(k dt)` for `j <= depth`, `k <= n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpGrid {
    pub depth: usize,
    pub n_max: usize,
    /// `pg[j][k]`.
    pub pg: Vec<Vec<f64>>,
}

impl DpGrid {
    pub fn row(&self, j: usize) -> &[f64] {
        &self.pg[j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTrace {
    /// `(t, p_g)` with strictly increasing `t`.
    pub samples: Vec<(f64, f64)>,
}

impl ProbabilityTrace {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        for w in samples.windows(2) {
            if w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::domain(format!("trace times not increasing at t = {}", w[1].0)));
            }
        }
        for &(t, p) in &samples {
            if !t.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!("invalid trace sample ({t}, {p})")));
            }
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }
}

fn sin2(x: f64) -> f64 {
    let s = x.sin();
    s * s
}

fn cos2(x: f64) -> f64 {
    let c = x.cos();
    c * c
}

/// Rounds away tiny excursions outside `[0, 1]` left by accumulated rounding.
fn clamp_unit(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

pub fn closed_pg(omega: f64, t: f64) -> f64 {
    sin2(omega * t)
}

/// Truncated binomial row `b(n, k, beta)` for `k` in `first..first + weights.len()`.
struct BinomialRow {
    first: usize,
    weights: Vec<f64>,
}

impl BinomialRow {
    fn new(n: usize, beta: f64, full_sums: bool) -> Result<Self> {
        let logs =
            (0..=n).map(|k| log_binomial_pmf(n as u64, k as u64, beta).map(|w| w.ln())).collect::<Result<Vec<_>>>()?;
        if full_sums {
            return Ok(Self { first: 0, weights: logs.into_iter().map(f64::exp).collect() });
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let floor = max + TAIL_CUTOFF.ln();
        let first = logs.iter().position(|&l| l >= floor).unwrap_or(0);
        let last = logs.iter().rposition(|&l| l >= floor).unwrap_or(n);
        let weights = logs[first..=last].iter().map(|l| l.exp()).collect();
        Ok(Self { first, weights })
    }
}

pub fn build_dp_grid(params: &RabiParams, depth: usize, n_max: usize) -> Result<DpGrid> {
    build_dp_grid_with(params, depth, n_max, DpOptions::default())
}

/// Fills the table column by column: `P^(j)(n)` only reads `P^(j-1)(k)` for
/// `k <= n`, so each binomial row is computed once and shared by all depths.
pub fn build_dp_grid_with(params: &RabiParams, depth: usize, n_max: usize, options: DpOptions) -> Result<DpGrid> {
    let cost = (depth as u64).saturating_mul((n_max as u64 + 1).saturating_pow(2));
    if cost > options.budget {
        return Err(Error::ResourceLimit(format!(
            "dynamic program of depth {depth} and n_max {n_max} exceeds budget {}",
            options.budget
        )));
    }
    let phase = params.omega * params.delta_t;
    let sin2_steps: Vec<f64> = (0..=n_max).map(|m| sin2(phase * m as f64)).collect();
    let cos2_steps: Vec<f64> = (0..=n_max).map(|m| cos2(phase * m as f64)).collect();

    let mut pg = vec![vec![0.0; n_max + 1]; depth + 1];
    pg[0].copy_from_slice(&sin2_steps);
    for n in 0..=n_max {
        if depth == 0 {
            break;
        }
        let row = BinomialRow::new(n, params.beta, options.full_sums)?;
        for j in 1..=depth {
            let prev = &pg[j - 1];
            let mut acc = CompensatedSum::new();
            for (offset, &w) in row.weights.iter().enumerate() {
                let k = row.first + offset;
                let g = prev[k];
                acc.add(w * (g * cos2_steps[n - k] + (1.0 - g) * sin2_steps[n - k]));
            }
            pg[j][n] = clamp_unit(acc.value());
        }
    }
    Ok(DpGrid { depth, n_max, pg })
}

/// Number of DP steps needed to interpolate up to `t_max`.
pub fn n_max_for(params: &RabiParams, t_max: f64) -> usize {
    (t_max / (params.beta * params.delta_t)).ceil() as usize + 1
}

/// Indistinguishable-ensemble model with its grid built once for a time span.
#[derive(Debug, Clone)]
pub struct IndistModel {
    params: RabiParams,
    grid: DpGrid,
}

impl IndistModel {
    pub fn new(params: RabiParams, depth: usize, t_max: f64) -> Result<Self> {
        Self::with_options(params, depth, t_max, DpOptions::default())
    }

    pub fn with_options(params: RabiParams, depth: usize, t_max: f64, options: DpOptions) -> Result<Self> {
        check_time(t_max)?;
        let grid = build_dp_grid_with(&params, depth, n_max_for(&params, t_max), options)?;
        Ok(Self { params, grid })
    }

    pub fn grid(&self) -> &DpGrid {
        &self.grid
    }

    /// Linear interpolation of the deepest row at `n = t / (beta dt)`.
    ///
    /// With `beta = 1` every row equals the closed evolution at the nodes, and
    /// the closed form is returned at all times instead of its interpolant.
    pub fn pg(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if self.params.beta == 1.0 {
            return Ok(closed_pg(self.params.omega, t));
        }
        let steps = t / (self.params.beta * self.params.delta_t);
        let lo = steps.floor() as usize;
        let row = self.grid.row(self.grid.depth);
        if lo >= self.grid.n_max {
            if lo == self.grid.n_max && steps == lo as f64 {
                return Ok(row[lo]);
            }
            return Err(Error::domain(format!("t = {t} lies beyond the grid built for this model")));
        }
        let frac = steps - lo as f64;
        Ok(clamp_unit((1.0 - frac) * row[lo] + frac * row[lo + 1]))
    }
}

pub fn indist_pg(params: &RabiParams, depth: usize, t: f64) -> Result<f64> {
    IndistModel::new(*params, depth, t)?.pg(t)
}

/// Truncated closed form `(2 - z+^x - z-^x) / 4`, `x = t / (beta dt)`.
pub fn approx_pg(params: &RabiParams, t: f64) -> Result<f64> {
    check_time(t)?;
    let phase = 2.0 * params.delta_t * params.omega;
    let exponent = t / (params.beta * params.delta_t);
    let one = Complex64::new(1.0, 0.0);
    let z_plus = one - params.beta * (one - Complex64::from_polar(1.0, -phase));
    let z_minus = one - params.beta * (one - Complex64::from_polar(1.0, phase));
    if z_plus.norm() < 1e-14 {
        return Err(Error::domain("approximation base vanishes (beta = 1/2, omega dt = pi/2)"));
    }
    let total = 2.0 - complex_real_power(z_plus, exponent)? - complex_real_power(z_minus, exponent)?;
    if total.im.abs() >= 1e-10 {
        return Err(Error::Consistency(format!("imaginary residue {} in approximation", total.im)));
    }
    Ok(clamp_unit(0.25 * total.re))
}

/// Leading-order damping rate `2 (1 - beta) omega^2 dt` of the approximation.
pub fn gamma_quadratic(params: &RabiParams) -> f64 {
    2.0 * (1.0 - params.beta) * params.omega * params.omega * params.delta_t
}

/// Rabi frequency between vibrational levels `level` and `level + 1`.
pub fn freq_ladder(omega: f64, level: usize) -> f64 {
    let x = LAMB_DICKE * LAMB_DICKE;
    omega * LAMB_DICKE * (-x / 2.0).exp() * laguerre_gen(level, 1.0, x) / ((level + 1) as f64).sqrt()
}

/// Distinguishable-ensemble model.
///
/// `node[j-1] = p_{j-1}(j dt)` is the ground-state weight handed to members
/// garbled at the `j`-th node. Computing it needs every earlier branch at
/// that time, so the table of `p_j(m dt)` is swept row by row in `O(N^2)`
/// while only the current row is kept.
#[derive(Debug, Clone)]
pub struct DistModel {
    params: DistParams,
    node: Vec<f64>,
}

impl DistModel {
    pub fn new(params: DistParams, t_max: f64) -> Result<Self> {
        Self::with_max_nodes(params, t_max, DEFAULT_MAX_NODES)
    }

    pub fn with_max_nodes(params: DistParams, t_max: f64, max_nodes: usize) -> Result<Self> {
        check_time(t_max)?;
        let nodes = (t_max / params.delta_t).floor();
        if nodes > max_nodes as f64 {
            return Err(Error::ResourceLimit(format!("{nodes} interference nodes exceed the limit of {max_nodes}")));
        }
        let nodes = nodes as usize;
        let phase = params.omega * params.delta_t;
        let sin2_steps: Vec<f64> = (0..=nodes).map(|m| sin2(phase * m as f64)).collect();
        let cos2_steps: Vec<f64> = (0..=nodes).map(|m| cos2(phase * m as f64)).collect();
        let eta = params.eta;

        // row[m] = p_j(m dt)
        let mut row = sin2_steps.clone();
        let mut node = Vec::with_capacity(nodes);
        for j in 1..=nodes {
            let a = row[j];
            node.push(a);
            for m in j..=nodes {
                let garbled = a * cos2_steps[m - j] + (1.0 - a) * sin2_steps[m - j];
                row[m] = eta * row[m] + (1.0 - eta) * garbled;
            }
        }
        Ok(Self { params, node })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.node
    }

    pub fn pg(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let DistParams { omega, delta_t, eta } = self.params;
        let n = (t / delta_t).floor() as usize;
        if n > self.node.len() {
            return Err(Error::domain(format!("t = {t} lies beyond the nodes built for this model")));
        }
        let mut p = sin2(omega * t);
        for (idx, &a) in self.node[..n].iter().enumerate() {
            let tau = t - (idx + 1) as f64 * delta_t;
            p = eta * p + (1.0 - eta) * (a * cos2(omega * tau) + (1.0 - a) * sin2(omega * tau));
        }
        Ok(clamp_unit(p))
    }
}

pub fn dist_pg(params: &DistParams, t: f64) -> Result<f64> {
    DistModel::new(*params, t)?.pg(t)
}

/// Model selection for [`trace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Closed { omega: f64 },
    Indist { params: RabiParams, depth: usize },
    Approx { params: RabiParams },
    Dist { params: DistParams },
}

impl Model {
    pub fn omega(&self) -> f64 {
        match self {
            Model::Closed { omega } => *omega,
            Model::Indist { params, .. } | Model::Approx { params } => params.omega,
            Model::Dist { params } => params.omega,
        }
    }
}

/// Samples the model uniformly on `[0, t_max]`.
pub fn trace(model: &Model, t_max: f64, samples: usize) -> Result<ProbabilityTrace> {
    check_positive("t_max", t_max)?;
    if samples < 2 {
        return Err(Error::domain("a trace needs at least 2 samples"));
    }
    let step = t_max / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|i| if i + 1 == samples { t_max } else { i as f64 * step }).collect();
    let values = match model {
        Model::Closed { omega } => {
            check_positive("omega", *omega)?;
            times.iter().map(|&t| Ok(closed_pg(*omega, t))).collect::<Result<Vec<_>>>()?
        }
        Model::Indist { params, depth } => {
            let m = IndistModel::new(*params, *depth, t_max)?;
            times.iter().map(|&t| m.pg(t)).collect::<Result<Vec<_>>>()?
        }
        Model::Approx { params } => times.iter().map(|&t| approx_pg(params, t)).collect::<Result<Vec<_>>>()?,
        Model::Dist { params } => {
            let m = DistModel::new(*params, t_max)?;
            times.iter().map(|&t| m.pg(t)).collect::<Result<Vec<_>>>()?
        }
    };
    ProbabilityTrace::new(times.into_iter().zip(values).collect())
}
