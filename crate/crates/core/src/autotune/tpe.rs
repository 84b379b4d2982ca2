//! Univariate Tree-structured Parzen Estimator.
//!
//! Observations are split into a good set (the lowest `⌈γ n⌉` costs) and a
//! bad set. Per parameter, each set becomes a mixture of Gaussians truncated
//! to the normalized domain `[0, 1]`, plus a uniform prior component;
//! candidates are drawn from the good mixture and ranked by
//! `Σ log ℓ(θ) − log g(θ)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::space::{sample_uniform, ParameterDecl, ParameterSet, SearchSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TpeConfig {
    pub n_startup: usize,
    pub gamma: f64,
    pub n_candidates: usize,
    /// Multiplier in `factor · σ̂ · n^(−1/5)`.
    pub bandwidth_factor: f64,
    /// Smallest bandwidth, in normalized units.
    pub bandwidth_floor: f64,
    /// Weight of a uniform component relative to one kernel; 0 disables it.
    #[serde(default = "default_prior_weight")]
    pub prior_weight: f64,
}

fn default_prior_weight() -> f64 {
    1.0
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            n_startup: 10,
            gamma: 0.25,
            n_candidates: 24,
            bandwidth_factor: 1.06,
            bandwidth_floor: 0.01,
            prior_weight: 1.0,
        }
    }
}

/// Truncated Gaussian mixture on `[0, 1]` with a shared bandwidth and an
/// optional uniform component.
#[derive(Debug, Clone)]
pub(crate) struct Parzen {
    centers: Vec<f64>,
    bandwidth: f64,
    /// `log(Φ((1−μ)/h) − Φ(−μ/h))` per center.
    log_mass: Vec<f64>,
    prior_weight: f64,
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl Parzen {
    /// Fits kernels at `centers` with bandwidth `factor · σ · n^(−1/5)`,
    /// floored, where `n` is the number of centers.
    pub(crate) fn fit(centers: Vec<f64>, sigma: f64, cfg: &TpeConfig) -> Self {
        assert!(!centers.is_empty(), "Parzen estimator needs observations");
        let n = centers.len() as f64;
        let bandwidth = (cfg.bandwidth_factor * sigma * n.powf(-0.2)).max(cfg.bandwidth_floor);
        let phi = std_normal();
        let log_mass = centers
            .iter()
            .map(|&mu| (phi.cdf((1.0 - mu) / bandwidth) - phi.cdf(-mu / bandwidth)).ln())
            .collect();
        Self {
            centers,
            bandwidth,
            log_mass,
            prior_weight: cfg.prior_weight,
        }
    }

    #[cfg(test)]
    pub(crate) fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub(crate) fn log_density(&self, x: f64) -> f64 {
        let phi = std_normal();
        let mut terms: Vec<f64> = self
            .centers
            .iter()
            .zip(&self.log_mass)
            .map(|(&mu, &lm)| phi.ln_pdf((x - mu) / self.bandwidth) - self.bandwidth.ln() - lm)
            .collect();
        if self.prior_weight > 0.0 {
            terms.push(self.prior_weight.ln());
        }
        log_sum_exp(&terms) - (self.centers.len() as f64 + self.prior_weight).ln()
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = self.centers.len() as f64 + self.prior_weight;
        if self.prior_weight > 0.0 && rng.random::<f64>() * total < self.prior_weight {
            return rng.random::<f64>();
        }
        let mu = self.centers[rng.random_range(0..self.centers.len())];
        let phi = std_normal();
        let lo = phi.cdf(-mu / self.bandwidth);
        let hi = phi.cdf((1.0 - mu) / self.bandwidth);
        let u = lo + rng.random::<f64>() * (hi - lo);
        (mu + self.bandwidth * phi.inverse_cdf(u)).clamp(0.0, 1.0)
    }
}

/// Sample standard deviation (`n − 1` denominator); 0 for fewer than two values.
pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Indices of the good set: the `⌈γ n⌉` lowest costs, ties by lower index.
pub(crate) fn split_good(costs: &[f64], gamma: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    let key = |c: f64| if c.is_nan() { f64::INFINITY } else { c };
    order.sort_by(|&a, &b| key(costs[a]).total_cmp(&key(costs[b])).then(a.cmp(&b)));
    let n_good = ((gamma * costs.len() as f64).ceil() as usize).clamp(1, costs.len());
    order.truncate(n_good);
    order
}

/// Proposes the next parameter set from `(parameters, cost)` history.
pub fn suggest_tpe<R: Rng + ?Sized>(
    space: &SearchSpace,
    history: &[(&ParameterSet, f64)],
    cfg: &TpeConfig,
    rng: &mut R,
) -> ParameterSet {
    if history.len() < cfg.n_startup.max(2) {
        return sample_uniform(space, rng);
    }
    let costs: Vec<f64> = history.iter().map(|h| h.1).collect();
    let good = split_good(&costs, cfg.gamma);
    let mut is_good = vec![false; history.len()];
    for &i in &good {
        is_good[i] = true;
    }
    if good.len() == history.len() {
        return sample_uniform(space, rng);
    }
    let models: Vec<(&ParameterDecl, Parzen, Parzen)> = space
        .params
        .iter()
        .map(|decl| {
            let all: Vec<f64> = history
                .iter()
                .map(|(set, _)| decl.normalize(set.get(&decl.name).unwrap_or(decl.manual).clamp(decl.lower, decl.upper)))
                .collect();
            // The spread of the whole history sets the kernel scale, so the
            // good set cannot shrink onto a single early point.
            let sigma = sample_std(&all);
            let (mut lv, mut gv) = (Vec::new(), Vec::new());
            for (u, good) in all.into_iter().zip(&is_good) {
                if *good {
                    lv.push(u);
                } else {
                    gv.push(u);
                }
            }
            (decl, Parzen::fit(lv, sigma, cfg), Parzen::fit(gv, sigma, cfg))
        })
        .collect();

    let mut best: Option<(f64, ParameterSet)> = None;
    for _ in 0..cfg.n_candidates.max(1) {
        let mut set = ParameterSet::default();
        let mut score = 0.0;
        for (decl, l, g) in &models {
            let v = decl.denormalize(l.sample(rng));
            let u = decl.normalize(v);
            score += l.log_density(u) - g.log_density(u);
            set.set(&decl.name, v);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, set));
        }
    }
    best.expect("at least one candidate").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autotune::space::{Scale, ValueKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_space() -> SearchSpace {
        SearchSpace::new(vec![ParameterDecl::float("theta", 0.0, 1.0, Scale::Uniform, 0.5)]).unwrap()
    }

    fn run_quadratic(seed: u64, trials: usize) -> f64 {
        let space = unit_space();
        let cfg = TpeConfig::default();
        let mut hist: Vec<(ParameterSet, f64)> = Vec::new();
        for i in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::world::derive_seed(seed, i as u64));
            let view: Vec<(&ParameterSet, f64)> = hist.iter().map(|(p, c)| (p, *c)).collect();
            let p = suggest_tpe(&space, &view, &cfg, &mut rng);
            let t = p.get("theta").unwrap();
            hist.push((p, (t - 0.3).powi(2)));
        }
        let (p, _) = hist.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        p.get("theta").unwrap()
    }

    #[test]
    fn truncated_mixture_integrates_to_one() {
        for (prior_weight, centers) in [0.0, 1.0].into_iter().flat_map(|w| {
            [vec![0.0], vec![0.5], vec![1.0, 0.9, 0.2], vec![0.3, 0.31]].map(|c| (w, c))
        }) {
            let cfg = TpeConfig {
                prior_weight,
                ..TpeConfig::default()
            };
            let sigma = sample_std(&centers);
            let p = Parzen::fit(centers, sigma, &cfg);
            let n = 200_000;
            let integral: f64 = (0..n)
                .map(|i| p.log_density((i as f64 + 0.5) / n as f64).exp())
                .sum::<f64>()
                / n as f64;
            assert!((integral - 1.0).abs() < 1e-3, "{integral}");
        }
    }

    #[test]
    fn bandwidth_follows_scott_rule_with_floor() {
        let cfg = TpeConfig::default();
        assert_eq!(Parzen::fit(vec![0.4], 0.0, &cfg).bandwidth(), 0.01);
        let p = Parzen::fit(vec![0.0, 1.0], sample_std(&[0.0, 1.0]), &cfg);
        let want = 1.06 * 2f64.sqrt() / 2.0 * 2f64.powf(-0.2);
        assert!((p.bandwidth() - want).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_unit_interval() {
        let cfg = TpeConfig::default();
        let p = Parzen::fit(vec![0.0, 1.0, 0.999], 0.5, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let x = p.sample(&mut rng);
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn good_split_uses_ceiling_and_index_ties() {
        assert_eq!(split_good(&[3.0, 1.0, 2.0, 1.0], 0.25), vec![1]);
        assert_eq!(split_good(&[2.0; 10], 0.25), vec![0, 1, 2]);
        assert_eq!(split_good(&[f64::INFINITY, 5.0, f64::NAN], 0.5), vec![1, 0]);
    }

    #[test]
    fn startup_matches_uniform_sampling() {
        let space = SearchSpace::default_space();
        let hist_sets: Vec<ParameterSet> = (0..9).map(|_| space.manual()).collect();
        let hist: Vec<(&ParameterSet, f64)> = hist_sets.iter().map(|p| (p, 1.0)).collect();
        let a = suggest_tpe(&space, &hist, &TpeConfig::default(), &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_uniform(&space, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn suggestions_in_bounds_and_varied_when_costs_tie() {
        let space = SearchSpace::default_space();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sets: Vec<ParameterSet> = (0..15).map(|_| sample_uniform(&space, &mut rng)).collect();
        let hist: Vec<(&ParameterSet, f64)> = sets.iter().map(|p| (p, 1.0)).collect();
        let draws: Vec<ParameterSet> = (0..20)
            .map(|_| suggest_tpe(&space, &hist, &TpeConfig::default(), &mut rng))
            .collect();
        for d in &draws {
            space.check(d).unwrap();
            for decl in &space.params {
                if decl.kind == ValueKind::Int {
                    assert_eq!(d.get(&decl.name).unwrap().fract(), 0.0);
                }
            }
        }
        assert!(draws.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn quadratic_minimum_is_found() {
        let hits = (0..10).filter(|&s| (run_quadratic(s, 60) - 0.3).abs() <= 0.05).count();
        assert!(hits >= 9, "{hits}/10");
    }
}
