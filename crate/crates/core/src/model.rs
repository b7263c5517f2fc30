//! Input side of the dam model: batch-size distribution, service laws,
//! cost profiles and the assembled [`DamModel`].

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

const PMF_TOL: f64 = 1e-12;

/// Batch-size pmf `r_1..r_K` (support starts at 1: an arrival always brings
/// at least one unit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchDistribution {
    probs: Vec<f64>,
}

impl BatchDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Model("batch pmf must be non-empty".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Model("batch probabilities must lie in [0,1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(Error::Model(format!(
                "batch pmf sums to {total}, expected 1 within {PMF_TOL:e}"
            )));
        }
        Ok(Self { probs })
    }

    /// Single batch size with probability one.
    pub fn single() -> Self {
        Self { probs: vec![1.0] }
    }

    /// `r_i` for i = 1..K as a slice (index 0 holds r_1).
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn max_size(&self) -> usize {
        self.probs.len()
    }

    /// Generating function R̂(z) = Σ r_i z^i (finite sum, any real z).
    pub fn pgf(&self, z: f64) -> f64 {
        // Horner over r_K..r_1, then one extra factor of z for the offset.
        let inner = self.probs.iter().rev().fold(0.0, |acc, &r| acc * z + r);
        inner * z
    }

    /// R̂'(z) = Σ i r_i z^{i-1}.
    pub fn pgf_deriv(&self, z: f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(idx, &r)| (idx + 1) as f64 * r * z.powi(idx as i32))
            .sum()
    }

    /// Raw moment Σ i^order r_i for order 1..=3.
    pub fn moment(&self, order: u32) -> f64 {
        assert!((1..=3).contains(&order), "batch moments limited to orders 1-3");
        self.probs
            .iter()
            .enumerate()
            .map(|(idx, &r)| ((idx + 1) as f64).powi(order as i32) * r)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }
}

/// Parametric service law with closed-form LST and raw moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Deterministic { duration: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
}

impl ServiceDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } | Self::Erlang { rate, .. } if *rate <= 0.0 => {
                Err(Error::Model("service rate must be positive".into()))
            }
            Self::Erlang { shape: 0, .. } => {
                Err(Error::Model("Erlang shape must be at least 1".into()))
            }
            Self::Deterministic { duration } if *duration <= 0.0 => {
                Err(Error::Model("deterministic duration must be positive".into()))
            }
            Self::HyperExponential { weights, rates } => {
                if weights.len() != rates.len() || weights.is_empty() {
                    return Err(Error::Model(
                        "hyper-exponential weights/rates must be non-empty and equal length".into(),
                    ));
                }
                if rates.iter().any(|&r| r <= 0.0) || weights.iter().any(|&w| w < 0.0) {
                    return Err(Error::Model(
                        "hyper-exponential rates must be positive, weights nonnegative".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > PMF_TOL {
                    return Err(Error::Model(format!(
                        "hyper-exponential weights sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    /// Service rate μ = 1 / mean.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    /// Raw moment E X^order for order 1..=3 (finite for all four families).
    pub fn raw_moment(&self, order: u32) -> f64 {
        assert!((1..=3).contains(&order), "service moments limited to orders 1-3");
        let k = order as i32;
        match self {
            Self::Exponential { rate } => factorial(order) / rate.powi(k),
            Self::Erlang { shape, rate } => {
                // n(n+1)...(n+k-1) / rate^k
                let n = *shape as f64;
                (0..order).map(|j| n + j as f64).product::<f64>() / rate.powi(k)
            }
            Self::Deterministic { duration } => duration.powi(k),
            Self::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * factorial(order) / r.powi(k))
                .sum(),
        }
    }

    /// Infimum of the LST convergence strip (the LST is finite for s > this).
    pub fn strip_min(&self) -> f64 {
        match self {
            Self::Exponential { rate } => -rate,
            Self::Erlang { rate, .. } => -rate,
            Self::Deterministic { .. } => f64::NEG_INFINITY,
            Self::HyperExponential { rates, .. } => {
                -rates.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Laplace-Stieltjes transform B̂(s) = ∫ e^{-sx} dB(x).
    pub fn lst(&self, s: f64) -> Result<f64> {
        if s <= self.strip_min() {
            return Err(Error::Domain(format!(
                "LST argument {s} outside convergence strip (s > {})",
                self.strip_min()
            )));
        }
        Ok(match self {
            Self::Exponential { rate } => rate / (rate + s),
            Self::Erlang { shape, rate } => (rate / (rate + s)).powi(*shape as i32),
            Self::Deterministic { duration } => (-s * duration).exp(),
            Self::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r / (r + s))
                .sum(),
        })
    }

    /// B̂'(s), used by root residual polish and the Takács amplitude.
    pub fn lst_deriv(&self, s: f64) -> Result<f64> {
        if s <= self.strip_min() {
            return Err(Error::Domain(format!(
                "LST derivative argument {s} outside convergence strip"
            )));
        }
        Ok(match self {
            Self::Exponential { rate } => -rate / ((rate + s) * (rate + s)),
            Self::Erlang { shape, rate } => {
                let n = *shape as f64;
                -n / rate * (rate / (rate + s)).powi(*shape as i32 + 1)
            }
            Self::Deterministic { duration } => -duration * (-s * duration).exp(),
            Self::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| -w * r / ((r + s) * (r + s)))
                .sum(),
        })
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Level-dependent water cost `c_1..c_L`, nonincreasing in the level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CostProfile {
    Constant { c: f64 },
    /// c_i = c̄ - (i-1)/(L-1)(c̄ - c̲); c_high = c̄ at level 1, c_low = c̲ at L.
    Linear { c_high: f64, c_low: f64 },
    /// Explicit nonincreasing sequence; rescaled to other L by piecewise
    /// linear interpolation on the level fraction (endpoints fixed).
    Table { values: Vec<f64> },
}

impl CostProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { c } => {
                if *c < 0.0 {
                    return Err(Error::Model("constant cost must be nonnegative".into()));
                }
            }
            Self::Linear { c_high, c_low } => {
                if *c_low < 0.0 || c_low > c_high {
                    return Err(Error::Model(
                        "linear costs require 0 <= c_low <= c_high".into(),
                    ));
                }
            }
            Self::Table { values } => {
                if values.is_empty() {
                    return Err(Error::Model("cost table must be non-empty".into()));
                }
                if values.iter().any(|&c| c <= 0.0) {
                    return Err(Error::Model("cost table entries must be positive".into()));
                }
                if values.windows(2).any(|w| w[1] > w[0] + PMF_TOL) {
                    return Err(Error::Model("cost table must be nonincreasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Cost at level fraction t ∈ [0,1] (t = (i-1)/(L-1)); c(0) = c_1 = c̄,
    /// c(1) = c_L = c̲. This is the function the ψ/η limits integrate.
    pub fn at_fraction(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self {
            Self::Constant { c } => *c,
            Self::Linear { c_high, c_low } => c_high - t * (c_high - c_low),
            Self::Table { values } => {
                if values.len() == 1 {
                    return values[0];
                }
                let x = t * (values.len() - 1) as f64;
                let lo = (x.floor() as usize).min(values.len() - 2);
                let frac = x - lo as f64;
                values[lo] * (1.0 - frac) + values[lo + 1] * frac
            }
        }
    }

    /// The cost sequence regenerated for a given L.
    pub fn costs_for(&self, level: usize) -> Vec<f64> {
        if level == 1 {
            return vec![self.at_fraction(0.0)];
        }
        (0..level)
            .map(|i| self.at_fraction(i as f64 / (level - 1) as f64))
            .collect()
    }

    /// Cesàro mean c* = lim (1/L) Σ c_i.
    pub fn cesaro_mean(&self) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Linear { c_high, c_low } => 0.5 * (c_high + c_low),
            Self::Table { values } => {
                // Trapezoid of the interpolant equals the Cesàro limit.
                let n = values.len();
                if n == 1 {
                    return values[0];
                }
                let interior: f64 = values[1..n - 1].iter().sum();
                (0.5 * (values[0] + values[n - 1]) + interior) / (n - 1) as f64
            }
        }
    }
}

/// Full model instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DamModel {
    pub lambda: f64,
    pub batches: BatchDistribution,
    pub b1: ServiceDistribution,
    pub b2: ServiceDistribution,
    /// Threshold level L >= 1.
    pub level: usize,
    /// Passage-damage rates (j1, j2); J_k = j_k * L.
    pub damage: (f64, f64),
    pub costs: CostProfile,
}

impl DamModel {
    pub fn new(
        lambda: f64,
        batches: BatchDistribution,
        b1: ServiceDistribution,
        b2: ServiceDistribution,
        level: usize,
        damage: (f64, f64),
        costs: CostProfile,
    ) -> Result<Self> {
        let m = Self { lambda, batches, b1, b2, level, damage, costs };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::Model("arrival rate must be positive".into()));
        }
        if self.level == 0 {
            return Err(Error::Model("threshold level must be at least 1".into()));
        }
        if self.damage.0 < 0.0 || self.damage.1 < 0.0 {
            return Err(Error::Model("damage rates must be nonnegative".into()));
        }
        self.b1.validate()?;
        self.b2.validate()?;
        self.costs.validate()?;
        let rho2 = self.rho2();
        if rho2 >= 1.0 {
            return Err(Error::Model(format!(
                "unstable above threshold: rho2 = {rho2} >= 1"
            )));
        }
        Ok(())
    }

    /// ρ1 = λ Eς / μ1.
    pub fn rho1(&self) -> f64 {
        self.lambda * self.batches.mean() * self.b1.mean()
    }

    /// ρ2 = λ Eς / μ2 (< 1 by the stability invariant).
    pub fn rho2(&self) -> f64 {
        self.lambda * self.batches.mean() * self.b2.mean()
    }

    /// ρ_{1,2} = λ² ∫ x² dB1.
    pub fn rho12(&self) -> f64 {
        self.lambda * self.lambda * self.b1.raw_moment(2)
    }

    /// ρ_{1,3} = λ³ ∫ x³ dB1.
    pub fn rho13(&self) -> f64 {
        self.lambda.powi(3) * self.b1.raw_moment(3)
    }

    /// The heavy-traffic denominator κ = ρ12 (Eς)³ + Eς² - Eς evaluated at
    /// this model's own parameters.
    pub fn kappa(&self) -> f64 {
        let es = self.batches.mean();
        let es2 = self.batches.moment(2);
        self.rho12() * es.powi(3) + es2 - es
    }

    /// Water-cost sequence c_1..c_L for this model's L.
    pub fn cost_sequence(&self) -> Vec<f64> {
        self.costs.costs_for(self.level)
    }
}
