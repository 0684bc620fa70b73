//! Generalized extreme value statistics for block maxima.
//!
//! G(z) = exp(-(1 + ξ(z-μ)/σ)^(-1/ξ)), with the Gumbel limit exp(-exp(-(z-μ)/σ))
//! taken whenever |ξ| < 1e-9.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const XI_ZERO: f64 = 1e-9;
const MIN_MAXIMA: usize = 10;
const NM_MAX_ITER: usize = 2000;
const NM_DIAMETER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(mu.is_finite() && xi.is_finite() && sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "GEV needs finite mu, xi and sigma > 0 (got {mu}, {sigma}, {xi})"
            )));
        }
        Ok(GevParams { mu, sigma, xi })
    }

    fn gumbel(&self) -> bool {
        self.xi.abs() < XI_ZERO
    }

    /// Value of z at which 1 + ξ(z-μ)/σ reaches zero, if the support is bounded.
    pub fn endpoint(&self) -> Option<f64> {
        if self.gumbel() {
            None
        } else {
            Some(self.mu - self.sigma / self.xi)
        }
    }

    /// True when the density is positive at z.
    pub fn in_support(&self, z: f64) -> bool {
        self.gumbel() || 1.0 + self.xi * (z - self.mu) / self.sigma > 0.0
    }

    /// Inverse CDF at probability p in (0,1).
    pub fn inv_cdf(&self, p: f64) -> f64 {
        self.quantile_at_y(-p.ln())
    }

    // y = -ln G(z)
    fn quantile_at_y(&self, y: f64) -> f64 {
        let ly = y.ln();
        if self.gumbel() {
            self.mu - self.sigma * ly
        } else {
            self.mu + self.sigma * (-self.xi * ly).exp_m1() / self.xi
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub unit: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, unit: impl Into<String>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "samples must be finite and nonnegative, found {v}"
            )));
        }
        Ok(SampleSet {
            values,
            unit: unit.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMaxima {
    pub maxima: Vec<f64>,
    pub block_size: usize,
}

impl BlockMaxima {
    pub fn from_values(maxima: Vec<f64>) -> Self {
        BlockMaxima {
            maxima,
            block_size: 1,
        }
    }
}

/// Maxima of consecutive blocks of length k; a trailing partial block is dropped.
pub fn block_maxima(samples: &[f64], k: usize) -> Result<BlockMaxima> {
    if k < 1 {
        return Err(Error::InvalidParameter("block size k must be at least 1".into()));
    }
    if samples.len() < k {
        return Err(Error::TooFewSamples {
            needed: k,
            got: samples.len(),
        });
    }
    let maxima = samples
        .chunks_exact(k)
        .map(|b| b.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(BlockMaxima {
        maxima,
        block_size: k,
    })
}

/// z such that Pr(Z >= z) = eps_m.
pub fn gev_quantile(p: &GevParams, eps_m: f64) -> Result<f64> {
    if !(eps_m > 0.0 && eps_m < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps_m must lie in (0,1), got {eps_m}"
        )));
    }
    Ok(p.quantile_at_y(-(-eps_m).ln_1p()))
}

pub fn gev_cdf(p: &GevParams, z: f64) -> f64 {
    let s = (z - p.mu) / p.sigma;
    if p.gumbel() {
        return (-(-s).exp()).exp();
    }
    let t = p.xi * s;
    if t <= -1.0 {
        // outside the support: below the left endpoint (ξ>0) or above the right one (ξ<0)
        return if p.xi > 0.0 { 0.0 } else { 1.0 };
    }
    (-(-t.ln_1p() / p.xi).exp()).exp()
}

pub fn gev_mean(p: &GevParams) -> f64 {
    if p.xi >= 1.0 {
        return f64::INFINITY;
    }
    if p.gumbel() {
        return p.mu + p.sigma * EULER_GAMMA;
    }
    p.mu + p.sigma * ln_gamma(1.0 - p.xi).exp_m1() / p.xi
}

/// Inverse-transform draw.
pub fn gev_sample<R: Rng + ?Sized>(p: &GevParams, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    p.inv_cdf(u)
}

/// Log-likelihood of the maxima; -inf if any point lies outside the support.
pub fn log_likelihood(p: &GevParams, data: &[f64]) -> f64 {
    if !(p.sigma > 0.0) || !p.sigma.is_finite() {
        return f64::NEG_INFINITY;
    }
    let ls = p.sigma.ln();
    let mut ll = 0.0;
    for &x in data {
        let s = (x - p.mu) / p.sigma;
        if p.gumbel() {
            ll += -ls - s - (-s).exp();
        } else {
            let t = p.xi * s;
            if t <= -1.0 {
                return f64::NEG_INFINITY;
            }
            let lt = t.ln_1p();
            ll += -ls - (1.0 + 1.0 / p.xi) * lt - (-lt / p.xi).exp();
        }
    }
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

/// Probability-weighted-moment estimates (Hosking, Wallis & Wood), pulled
/// toward ξ = 0 until every maximum is inside the support.
pub fn pwm_start(data: &[f64]) -> GevParams {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (j, &v) in x.iter().enumerate() {
        let j = j as f64;
        b0 += v;
        b1 += v * j / (n - 1.0);
        b2 += v * j * (j - 1.0) / ((n - 1.0) * (n - 2.0));
    }
    b0 /= n;
    b1 /= n;
    b2 /= n;

    let c = (2.0 * b1 - b0) / (3.0 * b2 - b0) - 2f64.ln() / 3f64.ln();
    let k = 7.8590 * c + 2.9554 * c * c;
    let (mu, sigma) = if k.abs() < 1e-6 {
        let sigma = (2.0 * b1 - b0) / 2f64.ln();
        (b0 - EULER_GAMMA * sigma, sigma)
    } else {
        let g = gamma(1.0 + k);
        let sigma = (2.0 * b1 - b0) * k / (g * (1.0 - 2f64.powf(-k)));
        (b0 + sigma * (g - 1.0) / k, sigma)
    };
    let mut p = GevParams { mu, sigma, xi: -k };
    if !(sigma.is_finite() && sigma > 0.0 && mu.is_finite() && k.is_finite()) {
        let var = x.iter().map(|v| (v - b0).powi(2)).sum::<f64>() / (n - 1.0);
        let sigma = (var.sqrt() * 6f64.sqrt() / std::f64::consts::PI).max(f64::MIN_POSITIVE);
        p = GevParams {
            mu: b0 - EULER_GAMMA * sigma,
            sigma,
            xi: 0.0,
        };
    }
    for _ in 0..64 {
        if x.iter().all(|&v| p.in_support(v)) {
            return p;
        }
        p.xi *= 0.5;
    }
    p.xi = 0.0;
    p
}

/// Maximum-likelihood GEV fit by Nelder-Mead over (μ, ln σ, ξ) started from
/// the PWM estimates.
pub fn fit_gev_mle(maxima: &BlockMaxima) -> Result<GevParams> {
    let data = &maxima.maxima;
    if data.len() < MIN_MAXIMA {
        return Err(Error::TooFewSamples {
            needed: MIN_MAXIMA,
            got: data.len(),
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("maxima must be finite".into()));
    }
    if data.iter().all(|&v| v == data[0]) {
        return Err(Error::DegenerateInput);
    }

    let start = pwm_start(data);
    let nll = |v: &[f64; 3]| {
        let p = GevParams {
            mu: v[0],
            sigma: v[1].exp(),
            xi: v[2],
        };
        -log_likelihood(&p, data)
    };
    let x0 = [start.mu, start.sigma.ln(), start.xi];
    let steps = [0.1 * start.sigma, 0.1, 0.05];
    let (best, iterations, converged) = nelder_mead(nll, x0, steps);
    let params = GevParams {
        mu: best[0],
        sigma: best[1].exp(),
        xi: best[2],
    };
    if converged {
        Ok(params)
    } else {
        Err(Error::FitNotConverged {
            iterations,
            best: params,
        })
    }
}

/// Fits block maxima of raw samples.
pub fn fit_samples(samples: &[f64], k: usize) -> Result<GevParams> {
    fit_gev_mle(&block_maxima(samples, k)?)
}

fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: F,
    x0: [f64; 3],
    steps: [f64; 3],
) -> ([f64; 3], usize, bool) {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SHRINK: f64 = 0.5;

    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((x0, f(&x0)));
    for i in 0..3 {
        let mut x = x0;
        x[i] += steps[i];
        let mut fx = f(&x);
        if !fx.is_finite() {
            x[i] = x0[i] - steps[i];
            fx = f(&x);
        }
        simplex.push((x, fx));
    }

    let diameter = |s: &[([f64; 3], f64)]| {
        let mut d: f64 = 0.0;
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                let dist = (0..3)
                    .map(|i| (s[a].0[i] - s[b].0[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                d = d.max(dist);
            }
        }
        d
    };
    let along = |c: &[f64; 3], w: &[f64; 3], t: f64| {
        let mut x = [0.0; 3];
        for i in 0..3 {
            x[i] = c[i] + t * (w[i] - c[i]);
        }
        x
    };

    let mut iter = 0;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < NM_DIAMETER {
            return (simplex[0].0, iter, true);
        }
        if iter >= NM_MAX_ITER {
            return (simplex[0].0, iter, false);
        }
        iter += 1;

        let mut c = [0.0; 3];
        for v in &simplex[..3] {
            for i in 0..3 {
                c[i] += v.0[i] / 3.0;
            }
        }
        let worst = simplex[3];
        let xr = along(&c, &worst.0, -ALPHA);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(&c, &worst.0, -GAMMA);
            let fe = f(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(&c, &worst.0, -RHO);
            (x, f(&x))
        } else {
            let x = along(&c, &worst.0, RHO);
            (x, f(&x))
        };
        if fc < worst.1.min(fr) {
            simplex[3] = (xc, fc);
            continue;
        }
        let best = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            v.0 = along(&best, &v.0, SHRINK);
            v.1 = f(&v.0);
        }
    }
}
