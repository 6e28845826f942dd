//! Occupation statistics for `n` photons scattered at a beam splitter.
//!
//! Four independent routes produce the same six moments:
//!
//! * [`stats_lossless_closed`]: closed-form second-quantized correlations,
//! * [`stats_partition_binomial`]: explicit sums over binomial partitions,
//! * [`stats_partition_multinomial`]: triple sums over reflect/transmit/loss partitions,
//! * [`stats_enumerate`]: brute force over every per-photon outcome string.
//!
//! Photons that are never registered carry the zero observable, so loss only
//! enters through the effective channel probabilities of [`SplitterChannels`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::numerics::{binomial_pmf, multinomial_pmf, CompensatedSum};

const SUM_TOL: f64 = 1e-12;

/// Largest `n` enumerated when the loss channel is empty (`2^n` outcomes).
pub const ENUMERATION_CAP_LOSSLESS: usize = 16;
/// Largest `n` enumerated with a loss channel (`3^n` outcomes).
pub const ENUMERATION_CAP_LOSSY: usize = 12;

/// Reflection and transmission probabilities of a lossless splitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterSpec {
    pub reflect: f64,
    pub transmit: f64,
}

impl SplitterSpec {
    pub fn new(reflect: f64, transmit: f64) -> Result<Self> {
        check_probability("reflect", reflect)?;
        check_probability("transmit", transmit)?;
        if (reflect + transmit - 1.0).abs() > SUM_TOL {
            return Err(Error::domain(format!("reflect + transmit = {} must equal 1", reflect + transmit)));
        }
        Ok(Self { reflect, transmit })
    }

    pub fn from_reflect(reflect: f64) -> Result<Self> {
        Self::new(reflect, 1.0 - reflect)
    }

    pub fn as_channels(&self) -> SplitterChannels {
        SplitterChannels { r_eff: self.reflect, t_eff: self.transmit, loss: 0.0 }
    }
}

/// Detector failure probabilities and the weight of the measurable system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySpec {
    pub eps_r: f64,
    pub eps_t: f64,
    pub w_b: f64,
}

impl EfficiencySpec {
    pub fn new(eps_r: f64, eps_t: f64, w_b: f64) -> Result<Self> {
        check_probability("eps_r", eps_r)?;
        check_probability("eps_t", eps_t)?;
        check_probability("w_b", w_b)?;
        Ok(Self { eps_r, eps_t, w_b })
    }

    pub fn ideal() -> Self {
        Self { eps_r: 0.0, eps_t: 0.0, w_b: 1.0 }
    }
}

/// Which photons make up the counted ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Every photon actively prepared in the incident channel.
    AllPrepared,
    /// Only photons scattered into the measurable system; `w_b` is ignored.
    ScatteredOnly,
}

/// Effective registered-reflect, registered-transmit and unregistered probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitterChannels {
    pub r_eff: f64,
    pub t_eff: f64,
    pub loss: f64,
}

impl SplitterChannels {
    pub fn new(r_eff: f64, t_eff: f64, loss: f64) -> Result<Self> {
        check_probability("r_eff", r_eff)?;
        check_probability("t_eff", t_eff)?;
        check_probability("loss", loss)?;
        let total = r_eff + t_eff + loss;
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::domain(format!("r_eff + t_eff + loss = {total} must equal 1")));
        }
        Ok(Self { r_eff, t_eff, loss })
    }

    fn probs(&self) -> [f64; 3] {
        [self.r_eff, self.t_eff, self.loss]
    }
}

/// The six first and second moments of the reflected/transmitted counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationStats {
    pub mean_r: f64,
    pub mean_t: f64,
    pub mean_rt: f64,
    pub var_r: f64,
    pub var_t: f64,
    pub cov_rt: f64,
}

impl OccupationStats {
    pub const FIELDS: [&'static str; 6] = ["mean_r", "mean_t", "mean_rt", "var_r", "var_t", "cov_rt"];

    pub fn as_array(&self) -> [f64; 6] {
        [self.mean_r, self.mean_t, self.mean_rt, self.var_r, self.var_t, self.cov_rt]
    }

    /// Largest discrepancy against `other`, relative to `max(|a|, |b|, 1)`.
    pub fn max_rel_diff(&self, other: &OccupationStats) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Per-photon outcome strings over `{r, t}` (or `{l, r, t}` with loss) and their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeWeights {
    pub n: usize,
    /// Lexicographically ordered.
    pub entries: BTreeMap<String, f64>,
}

impl OutcomeWeights {
    pub fn total(&self) -> f64 {
        self.entries.values().copied().collect::<CompensatedSum>().value()
    }
}

fn require_photons(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::domain("photon number n must be >= 1"))
    } else {
        Ok(())
    }
}

pub fn derive_channels(spec: &SplitterSpec, eff: &EfficiencySpec, convention: Convention) -> Result<SplitterChannels> {
    let (r, t) = (spec.reflect, spec.transmit);
    let (r_eff, t_eff, loss) = match convention {
        Convention::AllPrepared => (
            eff.w_b * (1.0 - eff.eps_r) * r,
            eff.w_b * (1.0 - eff.eps_t) * t,
            1.0 - eff.w_b * (1.0 - eff.eps_r * r - eff.eps_t * t),
        ),
        Convention::ScatteredOnly => ((1.0 - eff.eps_r) * r, (1.0 - eff.eps_t) * t, eff.eps_r * r + eff.eps_t * t),
    };
    SplitterChannels::new(r_eff, t_eff, loss.max(0.0)).map_err(|e| Error::Consistency(format!("derived channels: {e}")))
}

pub fn stats_lossless_closed(n: usize, spec: &SplitterSpec) -> Result<OccupationStats> {
    require_photons(n)?;
    let nf = n as f64;
    let (r, t) = (spec.reflect, spec.transmit);
    Ok(OccupationStats {
        mean_r: nf * r,
        mean_t: nf * t,
        mean_rt: r * t * nf * (nf - 1.0),
        var_r: nf * r * t,
        var_t: nf * r * t,
        cov_rt: -nf * r * t,
    })
}

/// Closed forms for lossy channels: the lossless expressions with `R`, `T`
/// replaced by `r_eff`, `t_eff`.
pub fn stats_closed(n: usize, channels: &SplitterChannels) -> Result<OccupationStats> {
    require_photons(n)?;
    let nf = n as f64;
    let (r, t) = (channels.r_eff, channels.t_eff);
    Ok(OccupationStats {
        mean_r: nf * r,
        mean_t: nf * t,
        mean_rt: r * t * nf * (nf - 1.0),
        var_r: nf * r * (1.0 - r),
        var_t: nf * t * (1.0 - t),
        cov_rt: -nf * r * t,
    })
}

/// Accumulates the six moment sums for a partition weight and its counts.
#[derive(Default)]
struct MomentSums {
    sums: [CompensatedSum; 6],
}

impl MomentSums {
    fn add(&mut self, weight: f64, reflected: f64, transmitted: f64, centre: (f64, f64)) {
        let dr = reflected - centre.0;
        let dt = transmitted - centre.1;
        let terms = [reflected, transmitted, reflected * transmitted, dr * dr, dt * dt, dr * dt];
        for (acc, term) in self.sums.iter_mut().zip(terms) {
            acc.add(weight * term);
        }
    }

    fn finish(&self) -> OccupationStats {
        let v = self.sums.map(|s| s.value());
        OccupationStats { mean_r: v[0], mean_t: v[1], mean_rt: v[2], var_r: v[3], var_t: v[4], cov_rt: v[5] }
    }
}

pub fn stats_partition_binomial(n: usize, spec: &SplitterSpec) -> Result<OccupationStats> {
    require_photons(n)?;
    let nf = n as f64;
    let centre = (nf * spec.reflect, nf * spec.transmit);
    let mut sums = MomentSums::default();
    for k in 0..=n {
        let w = binomial_pmf(n as u64, k as u64, spec.reflect)?;
        sums.add(w, k as f64, (n - k) as f64, centre);
    }
    Ok(sums.finish())
}

pub fn stats_partition_multinomial(n: usize, channels: &SplitterChannels) -> Result<OccupationStats> {
    require_photons(n)?;
    let nf = n as f64;
    let centre = (nf * channels.r_eff, nf * channels.t_eff);
    let probs = channels.probs();
    let mut sums = MomentSums::default();
    for j in 0..=n {
        for k in 0..=(n - j) {
            let l = n - j - k;
            let w = multinomial_pmf(n as u64, [j as u64, k as u64, l as u64], probs)?;
            sums.add(w, j as f64, k as f64, centre);
        }
    }
    Ok(sums.finish())
}

/// Symbols with nonzero probability, in lexicographic order.
fn alphabet(channels: &SplitterChannels) -> Vec<(u8, f64)> {
    [(b'l', channels.loss), (b'r', channels.r_eff), (b't', channels.t_eff)]
        .into_iter()
        .filter(|&(_, p)| p > 0.0)
        .collect()
}

fn check_enumeration_cap(n: usize, channels: &SplitterChannels) -> Result<()> {
    require_photons(n)?;
    let cap = if channels.loss > 0.0 { ENUMERATION_CAP_LOSSY } else { ENUMERATION_CAP_LOSSLESS };
    if n > cap {
        return Err(Error::ResourceLimit(format!("enumeration of n = {n} photons exceeds the cap of {cap}")));
    }
    Ok(())
}

/// Depth-first walk over all outcome strings, calling `visit` at every leaf.
fn walk_outcomes(
    symbols: &[(u8, f64)],
    n: usize,
    prefix: &mut Vec<u8>,
    weight: f64,
    visit: &mut impl FnMut(&[u8], f64),
) {
    if prefix.len() == n {
        visit(prefix, weight);
        return;
    }
    for &(symbol, p) in symbols {
        prefix.push(symbol);
        walk_outcomes(symbols, n, prefix, weight * p, visit);
        prefix.pop();
    }
}

/// Diagonal of the symmetrized `n`-photon density operator in the outcome basis.
pub fn density_weights(n: usize, channels: &SplitterChannels) -> Result<OutcomeWeights> {
    check_enumeration_cap(n, channels)?;
    let mut entries = BTreeMap::new();
    walk_outcomes(&alphabet(channels), n, &mut Vec::with_capacity(n), 1.0, &mut |s, w| {
        entries.insert(String::from_utf8(s.to_vec()).expect("ascii symbols"), w);
    });
    Ok(OutcomeWeights { n, entries })
}

/// Brute-force moments: counting operators summed against every outcome weight.
pub fn stats_enumerate(n: usize, channels: &SplitterChannels) -> Result<OccupationStats> {
    check_enumeration_cap(n, channels)?;
    let symbols = alphabet(channels);
    let count = |s: &[u8], c: u8| s.iter().filter(|&&x| x == c).count() as f64;

    let mut outcomes = Vec::with_capacity(symbols.len().pow(n as u32));
    walk_outcomes(&symbols, n, &mut Vec::with_capacity(n), 1.0, &mut |s, w| {
        outcomes.push((w, count(s, b'r'), count(s, b't')));
    });

    let mean_r: CompensatedSum = outcomes.iter().map(|&(w, r, _)| w * r).collect();
    let mean_t: CompensatedSum = outcomes.iter().map(|&(w, _, t)| w * t).collect();
    let centre = (mean_r.value(), mean_t.value());
    let mut sums = MomentSums::default();
    for &(w, r, t) in &outcomes {
        sums.add(w, r, t, centre);
    }
    Ok(sums.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn channels_from_efficiencies() {
        let half = SplitterSpec::from_reflect(0.5).unwrap();
        let c = derive_channels(&half, &EfficiencySpec::ideal(), Convention::AllPrepared).unwrap();
        assert_eq!((c.r_eff, c.t_eff, c.loss), (0.5, 0.5, 0.0));

        let eff = EfficiencySpec::new(0.1, 0.2, 0.3).unwrap();
        let c = derive_channels(&half, &eff, Convention::ScatteredOnly).unwrap();
        assert!(close(c.r_eff, 0.45, 1e-15) && close(c.t_eff, 0.40, 1e-15) && close(c.loss, 0.15, 1e-15));

        let spec = SplitterSpec::from_reflect(0.3).unwrap();
        let eff = EfficiencySpec::new(0.0, 0.0, 0.8).unwrap();
        let c = derive_channels(&spec, &eff, Convention::AllPrepared).unwrap();
        assert!(close(c.r_eff, 0.24, 1e-15) && close(c.t_eff, 0.56, 1e-15) && close(c.loss, 0.20, 1e-15));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SplitterSpec::new(0.5, 0.6).is_err());
        assert!(SplitterSpec::from_reflect(1.2).is_err());
        assert!(SplitterChannels::new(0.5, 0.5, 0.1).is_err());
        assert!(EfficiencySpec::new(-0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let half = SplitterSpec::from_reflect(0.5).unwrap();
        assert_eq!(stats_lossless_closed(1, &half).unwrap().mean_rt, 0.0);
        let s = stats_lossless_closed(3, &half).unwrap();
        assert_eq!(s.as_array(), [1.5, 1.5, 1.5, 0.75, 0.75, -0.75]);
        let s = stats_lossless_closed(10, &SplitterSpec::from_reflect(0.3).unwrap()).unwrap();
        assert!(close(s.mean_r, 3.0, 1e-15));
        assert!(stats_lossless_closed(0, &half).is_err());
    }

    #[test]
    fn binomial_route_matches_closed_form() {
        let half = SplitterSpec::from_reflect(0.5).unwrap();
        let s = stats_partition_binomial(3, &half).unwrap();
        assert!(close(s.cov_rt, -0.75, 1e-14));
        let one = stats_partition_binomial(1, &half).unwrap();
        assert!(one.max_rel_diff(&stats_lossless_closed(1, &half).unwrap()) < 1e-15);
        let spec = SplitterSpec::from_reflect(0.1).unwrap();
        let a = stats_partition_binomial(20, &spec).unwrap();
        let b = stats_lossless_closed(20, &spec).unwrap();
        assert!(a.max_rel_diff(&b) < 1e-10);
        assert!(stats_partition_binomial(0, &spec).is_err());
    }

    #[test]
    fn multinomial_examples() {
        let c = SplitterChannels::new(0.45, 0.40, 0.15).unwrap();
        let s = stats_partition_multinomial(5, &c).unwrap();
        assert!(close(s.var_r, 1.2375, 1e-12));
        assert!(close(s.var_t, 1.20, 1e-12));

        let c = SplitterChannels::new(1.0, 0.0, 0.0).unwrap();
        let s = stats_partition_multinomial(2, &c).unwrap();
        assert_eq!(s.as_array(), [2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn density_weight_examples() {
        let half = SplitterChannels::new(0.5, 0.5, 0.0).unwrap();
        let w = density_weights(3, &half).unwrap();
        assert_eq!(w.entries.len(), 8);
        assert_eq!(w.entries["rrt"], 0.125);
        let keys: Vec<_> = w.entries.keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);

        let w = density_weights(1, &SplitterChannels::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(w.entries.len(), 1);
        assert_eq!(w.entries["r"], 1.0);

        let lossy = SplitterChannels::new(0.45, 0.40, 0.15).unwrap();
        let w = density_weights(2, &lossy).unwrap();
        assert_eq!(w.entries.len(), 9);
        assert!(close(w.total(), 1.0, 1e-15));
        assert!(close(w.entries["lr"], 0.15 * 0.45, 1e-15));
    }

    #[test]
    fn enumeration_caps() {
        let half = SplitterChannels::new(0.5, 0.5, 0.0).unwrap();
        assert!(stats_enumerate(16, &half).is_ok());
        assert!(matches!(stats_enumerate(17, &half), Err(Error::ResourceLimit(_))));
        let lossy = SplitterChannels::new(0.45, 0.40, 0.15).unwrap();
        assert!(matches!(density_weights(13, &lossy), Err(Error::ResourceLimit(_))));
        assert!(stats_enumerate(0, &lossy).is_err());
    }

    #[test]
    fn enumeration_is_the_oracle() {
        let half = SplitterChannels::new(0.5, 0.5, 0.0).unwrap();
        let s = stats_enumerate(3, &half).unwrap();
        assert!(close(s.mean_rt, 1.5, 1e-15));
        let closed = stats_lossless_closed(3, &SplitterSpec::from_reflect(0.5).unwrap()).unwrap();
        assert!(s.max_rel_diff(&closed) < 1e-14);

        let lossy = SplitterChannels::new(0.45, 0.40, 0.15).unwrap();
        assert_eq!(stats_enumerate(1, &lossy).unwrap().mean_rt, 0.0);
        let a = stats_enumerate(12, &lossy).unwrap();
        let b = stats_partition_multinomial(12, &lossy).unwrap();
        assert!(a.max_rel_diff(&b) < 1e-10);
    }
}
