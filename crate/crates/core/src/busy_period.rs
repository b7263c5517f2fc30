//! Busy-period machinery: arrival-count coefficients f_i, the Takács-type
//! convolution recurrence for Eν̃_j^(1), the first-cycle count ζ1 and the
//! per-level expectations Eν_i^(1)(ζ1).

use crate::error::{Error, Result};
use crate::model::{BatchDistribution, DamModel, ServiceDistribution};

/// Which service law the coefficients are taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceLaw {
    B1,
    B2,
}

/// Coefficients f_i = Pr{i customers arrive during one service}.
#[derive(Debug, Clone)]
pub struct ArrivalCountCoeffs {
    pub f: Vec<f64>,
    pub truncation_error: f64,
}

/// Everything the exact stationary formulas consume.
#[derive(Debug, Clone)]
pub struct BusyPeriodTable {
    /// Eν̃_j^(1) for j = 0..=L (Eν̃_0 = 1).
    pub nu1_tilde: Vec<f64>,
    /// Pr{ζ1 = n} for n = 0.. (truncated).
    pub zeta1_pmf: Vec<f64>,
    /// Eν_i^(1)(ζ1) for i = 0..=L, computed with ζ1 ∧ i lumping.
    pub nu1: Vec<f64>,
    /// Exact Eζ1 = ρ1 - 1 + Eς (moment identity, not the truncated sum).
    pub zeta1_mean: f64,
}

/// Iterator over the mixed-Poisson weights
/// m_k = ∫ e^{-λx} (λx)^k / k! dB(x), via the per-family closed forms.
fn mixed_poisson_weights(dist: &ServiceDistribution, lambda: f64) -> impl Iterator<Item = f64> {
    enum W {
        /// Geometric mixture: Σ a_i g_i^k terms (covers Exp and HyperExp).
        Geometric(Vec<(f64, f64)>),
        /// Negative binomial: m_k = C(k+n-1,k) p^n q^k.
        NegBinomial { cur: f64, q: f64, n: f64, k: f64 },
        /// Poisson(λ d).
        Poisson { cur: f64, lam_d: f64, k: f64 },
    }
    let mut state = match dist {
        ServiceDistribution::Exponential { rate } => {
            W::Geometric(vec![(rate / (lambda + rate), lambda / (lambda + rate))])
        }
        ServiceDistribution::HyperExponential { weights, rates } => W::Geometric(
            weights
                .iter()
                .zip(rates)
                .map(|(w, r)| (w * r / (lambda + r), lambda / (lambda + r)))
                .collect(),
        ),
        ServiceDistribution::Erlang { shape, rate } => W::NegBinomial {
            cur: (rate / (lambda + rate)).powi(*shape as i32),
            q: lambda / (lambda + rate),
            n: *shape as f64,
            k: 0.0,
        },
        ServiceDistribution::Deterministic { duration } => W::Poisson {
            cur: (-lambda * duration).exp(),
            lam_d: lambda * duration,
            k: 0.0,
        },
    };
    std::iter::from_fn(move || {
        Some(match &mut state {
            W::Geometric(terms) => {
                let v = terms.iter().map(|&(a, _)| a).sum();
                for (a, g) in terms.iter_mut() {
                    *a *= *g;
                }
                v
            }
            W::NegBinomial { cur, q, n, k } => {
                let v = *cur;
                *cur *= *q * (*k + *n) / (*k + 1.0);
                *k += 1.0;
                v
            }
            W::Poisson { cur, lam_d, k } => {
                let v = *cur;
                *cur *= *lam_d / (*k + 1.0);
                *k += 1.0;
                v
            }
        })
    })
}

const MAX_MIXING_TERMS: usize = 2_000_000;

/// f_i = Σ_k m_k · r^{*k}_i for i = 0..=n_max; the k-sum stops when the
/// remaining mixed-Poisson mass drops below `tol`.
pub fn arrival_count_coeffs(
    m: &DamModel,
    which: ServiceLaw,
    n_max: usize,
    tol: f64,
) -> Result<ArrivalCountCoeffs> {
    let dist = match which {
        ServiceLaw::B1 => &m.b1,
        ServiceLaw::B2 => &m.b2,
    };
    coeffs_for(dist, &m.batches, m.lambda, n_max, tol)
}

pub(crate) fn coeffs_for(
    dist: &ServiceDistribution,
    batches: &BatchDistribution,
    lambda: f64,
    n_max: usize,
    tol: f64,
) -> Result<ArrivalCountCoeffs> {
    let r = batches.probs();
    let mut f = vec![0.0f64; n_max + 1];
    // conv holds r^{*k} truncated at n_max; starts as the delta at 0.
    let mut conv = vec![0.0f64; n_max + 1];
    conv[0] = 1.0;
    let mut conv_len = 1usize; // number of meaningful leading entries
    let mut remaining = 1.0f64;
    let mut done = false;
    for (k, w) in mixed_poisson_weights(dist, lambda).enumerate() {
        if k >= MAX_MIXING_TERMS {
            break;
        }
        for i in 0..conv_len {
            f[i] += w * conv[i];
        }
        remaining -= w;
        if remaining <= tol {
            done = true;
            break;
        }
        // conv <- conv * r, shifting by the batch offset (support starts at 1).
        let new_len = (conv_len + r.len()).min(n_max + 1);
        let mut next = vec![0.0f64; n_max + 1];
        for i in 0..conv_len {
            let c = conv[i];
            if c == 0.0 {
                continue;
            }
            for (j, &rj) in r.iter().enumerate() {
                let idx = i + j + 1;
                if idx <= n_max {
                    next[idx] += c * rj;
                }
            }
        }
        conv = next;
        conv_len = new_len;
        // Once k arrivals necessarily exceed n_max, the remaining terms
        // contribute nothing to f_0..f_n_max; the dropped mass shows up in
        // truncation_error and the caller can retry with a larger n_max.
        if conv_len > n_max && conv.iter().all(|&c| c == 0.0) {
            done = true;
            break;
        }
    }
    if !done && remaining > tol.max(1e-9) {
        return Err(Error::Truncation(format!(
            "mixed-Poisson mass {remaining:e} above tolerance after cap"
        )));
    }
    let total: f64 = f.iter().sum();
    Ok(ArrivalCountCoeffs { f, truncation_error: 1.0 - total })
}

/// Forward solve of Q_n = Σ_{i=0}^n Q_{n-i+1} f_i with Q_0 = q0:
/// Q_{n+1} = (Q_n - Σ_{i=1}^n Q_{n-i+1} f_i) / f_0.
/// With q0 = 1 the output is Eν̃_j^(1), j = 0..=n.
pub fn solve_takacs_recurrence(f: &ArrivalCountCoeffs, q0: f64, n: usize) -> Result<Vec<f64>> {
    let fs = &f.f;
    assert!(!fs.is_empty() && fs[0] > 0.0, "forward solve requires f_0 > 0");
    assert!(q0 > 0.0);
    let mut q = Vec::with_capacity(n + 1);
    q.push(q0);
    for m in 0..n {
        // Neumaier-compensated convolution sum: cancellation grows with n.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let upper = m.min(fs.len() - 1);
        for i in 1..=upper {
            let term = q[m - i + 1] * fs[i];
            let t = sum + term;
            comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
            sum = t;
        }
        let next = (q[m] - (sum + comp)) / fs[0];
        if !next.is_finite() {
            return Err(Error::Numerical(format!(
                "Takacs forward solve diverged at index {}",
                m + 1
            )));
        }
        q.push(next);
    }
    Ok(q)
}

/// Pr{ζ1 = n} = Σ_j r_j f_{n+1-j}, where ζ1 = κ1 - 1 + ς1 is the number of
/// independent busy cycles spawned by the first service completion.
pub fn zeta1_distribution(f: &ArrivalCountCoeffs, b: &BatchDistribution) -> Vec<f64> {
    let r = b.probs();
    let fs = &f.f;
    let mut z = vec![0.0f64; fs.len() + r.len()];
    for (j_idx, &rj) in r.iter().enumerate() {
        let j = j_idx + 1; // batch size
        for (i, &fi) in fs.iter().enumerate() {
            // n + 1 - j = i  =>  n = i + j - 1
            z[i + j - 1] += rj * fi;
        }
    }
    while z.len() > 1 && *z.last().unwrap() == 0.0 {
        z.pop();
    }
    z
}

/// Eν_L^(1)(ζ1) = 1 + E Σ_{i=1}^{ζ1∧L} ν̃_{L-i+1}^(1); mass of ζ1 at and
/// above L is lumped at L.
pub fn nu1_of_zeta(table: &[f64], zeta_pmf: &[f64], level: usize) -> f64 {
    assert!(table.len() > level, "nu1_tilde table shorter than L+1");
    nu1_all_levels(table, zeta_pmf, level)[level]
}

/// Eν_i^(1)(ζ1) for every i = 0..=L in one pass via prefix sums
/// W_m = Σ_{j<=m} Eν̃_j: Eν_i = 1 + Σ_{n<i} z_n (W_i - W_{i-n}) + Pr{ζ1>=i} W_i.
pub(crate) fn nu1_all_levels(table: &[f64], zeta_pmf: &[f64], level: usize) -> Vec<f64> {
    let mut w = vec![0.0f64; level + 1];
    for m in 1..=level {
        w[m] = w[m - 1] + table[m];
    }
    let mut nu = vec![1.0f64; level + 1];
    for i in 1..=level {
        let mut acc = 0.0f64;
        let mut head_mass = if !zeta_pmf.is_empty() { zeta_pmf[0] } else { 0.0 };
        for n in 1..i.min(zeta_pmf.len()) {
            acc += zeta_pmf[n] * (w[i] - w[i - n]);
            head_mass += zeta_pmf[n];
        }
        let tail = (1.0 - head_mass).max(0.0);
        nu[i] = 1.0 + acc + tail * w[i];
    }
    nu
}

/// Adaptive pipeline: picks the f/ζ1 truncation so the dropped tail is below
/// `tol`, then produces the full table for levels 0..=L.
pub fn compute_table(m: &DamModel, tol: f64) -> Result<BusyPeriodTable> {
    let es = m.batches.mean();
    let rho1 = m.rho1();
    let mut n_max = 256usize.max(4 * m.level);
    let f = loop {
        let f = arrival_count_coeffs(m, ServiceLaw::B1, n_max, tol)?;
        if f.truncation_error.abs() <= tol * 10.0 || n_max >= (1 << 24) {
            break f;
        }
        n_max *= 2;
    };
    if f.truncation_error.abs() > 1e-9 {
        return Err(Error::Truncation(format!(
            "arrival-count tail {:e} too heavy at n_max = {n_max}",
            f.truncation_error
        )));
    }
    let nu1_tilde = solve_takacs_recurrence(&f, 1.0, m.level)?;
    let zeta1_pmf = zeta1_distribution(&f, &m.batches);
    let nu1 = nu1_all_levels(&nu1_tilde, &zeta1_pmf, m.level);
    Ok(BusyPeriodTable { nu1_tilde, zeta1_pmf, nu1, zeta1_mean: rho1 - 1.0 + es })
}
