//! Discrete-event simulation of the exact model, used as an independent
//! oracle for the closed-form results.
//!
//! Conventions frozen to match the analysis (and the CTMC oracle):
//! * the first customer of every busy period is served by B1;
//! * the law of any later service is chosen by the queue length immediately
//!   before the service start, *including* the customer entering service,
//!   with strict inequality for B2 (count > L → B2);
//! * q_i estimates are time integrals of the level process, p1 of the empty
//!   state, p2 of {level > L}; the B2-service time fraction is also tracked.

use crate::error::Result;
use crate::model::{DamModel, ServiceDistribution};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Horizon {
    Events(u64),
    Time(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: DamModel,
    pub horizon: Horizon,
    pub seed: u64,
    /// Fraction of the horizon discarded before measurement, in [0, 0.5].
    pub warmup: f64,
}

/// Point estimate with a batch-means / replication standard error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusyStats {
    pub mean_busy_period: Estimate,
    pub mean_nu1: Estimate,
    pub mean_nu2: Estimate,
    pub mean_t1: Estimate,
    pub mean_t2: Estimate,
    pub cycles: u64,
    /// Sample check of λEς(ET_L + 1/λ) = Eν_L: lhs - rhs on the sample means.
    pub wald_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimEstimate {
    pub p1_hat: Estimate,
    /// Pr{level > L}.
    pub p2_hat: Estimate,
    /// Fraction of time in B2 service.
    pub p2_service_hat: Estimate,
    /// q_i for i = 1..=L.
    pub q_hat: Vec<Estimate>,
    pub busy: BusyStats,
    pub events: u64,
    pub sim_time: f64,
    /// Renewal-reward (per busy cycle) estimates of (p1, p2) on the same
    /// path; must agree with the time averages.
    pub p1_regen: f64,
    pub p2_regen: f64,
}

const N_BATCHES: usize = 25;

struct Streams {
    arrivals: ChaCha8Rng,
    batches: ChaCha8Rng,
    services: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        // One counter-based generator, three independent streams.
        let mk = |stream: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(stream);
            r
        };
        Self { arrivals: mk(0), batches: mk(1), services: mk(2) }
    }
}

fn sample_exp(rng: &mut impl RngCore, rate: f64) -> f64 {
    let u: f64 = rng.gen::<f64>();
    -(1.0 - u).ln() / rate
}

fn sample_service(rng: &mut impl RngCore, dist: &ServiceDistribution) -> f64 {
    match dist {
        ServiceDistribution::Exponential { rate } => sample_exp(rng, *rate),
        ServiceDistribution::Erlang { shape, rate } => {
            (0..*shape).map(|_| sample_exp(rng, *rate)).sum()
        }
        ServiceDistribution::Deterministic { duration } => *duration,
        ServiceDistribution::HyperExponential { weights, rates } => {
            let u: f64 = rng.gen::<f64>();
            let mut acc = 0.0;
            for (w, r) in weights.iter().zip(rates) {
                acc += w;
                if u < acc {
                    return sample_exp(rng, *r);
                }
            }
            sample_exp(rng, *rates.last().unwrap())
        }
    }
}

fn sample_batch(rng: &mut impl RngCore, probs: &[f64]) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i + 1;
        }
    }
    probs.len()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Law {
    B1,
    B2,
}

/// Per-measurement-window accumulators (one per batch-means window).
#[derive(Clone)]
struct Window {
    time: f64,
    idle: f64,
    above: f64,
    b2_service: f64,
    q: Vec<f64>,
}

impl Window {
    fn new(level: usize) -> Self {
        Self { time: 0.0, idle: 0.0, above: 0.0, b2_service: 0.0, q: vec![0.0; level] }
    }
}

struct Cycle {
    length: f64,
    nu1: u64,
    nu2: u64,
    t1: f64,
    t2: f64,
}

pub fn simulate(cfg: &SimConfig) -> Result<SimEstimate> {
    cfg.model.validate()?;
    assert!((0.0..=0.5).contains(&cfg.warmup), "warmup must lie in [0, 0.5]");
    let m = &cfg.model;
    let level = m.level;
    let mut s = Streams::new(cfg.seed);

    let (warm_budget, total_budget) = match cfg.horizon {
        Horizon::Events(n) => ((n as f64 * cfg.warmup) as u64, n),
        Horizon::Time(_) => (0, u64::MAX),
    };
    let (warm_time, total_time) = match cfg.horizon {
        Horizon::Time(t) => (t * cfg.warmup, t),
        Horizon::Events(_) => (0.0, f64::INFINITY),
    };

    let mut t = 0.0f64;
    let mut n = 0usize; // level (customers in system)
    let mut next_arrival = t + sample_exp(&mut s.arrivals, m.lambda);
    let mut service_end: f64 = f64::INFINITY;
    let mut law = Law::B1;
    let mut events: u64 = 0;

    let mut windows: Vec<Window> = Vec::with_capacity(N_BATCHES + 1);
    let mut cur = Window::new(level);
    let mut measuring = false;
    let mut measure_start_ev: u64 = 0;
    let mut measure_start_t: f64 = 0.0;
    // window switching thresholds in events (or time)
    let per_window_ev = ((total_budget.saturating_sub(warm_budget)) / N_BATCHES as u64).max(1);
    let per_window_time = (total_time - warm_time) / N_BATCHES as f64;

    // busy-period bookkeeping
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut cyc_start = 0.0f64;
    let mut cyc = Cycle { length: 0.0, nu1: 0, nu2: 0, t1: 0.0, t2: 0.0 };
    let mut in_busy = false;
    let mut service_start_t = 0.0f64;
    let mut idle_regen = 0.0f64; // idle time inside completed measured cycles
    let mut above_regen = 0.0f64;
    let mut cycle_accum_valid = false; // only count cycles fully inside measurement

    loop {
        let done = match cfg.horizon {
            Horizon::Events(nev) => events >= nev,
            Horizon::Time(tmax) => t >= tmax,
        };
        if done {
            break;
        }
        let t_next = next_arrival.min(service_end);
        let dt = t_next - t;
        if measuring && dt > 0.0 {
            cur.time += dt;
            if n == 0 {
                cur.idle += dt;
                if cycle_accum_valid {
                    idle_regen += dt;
                }
            } else if n > level {
                cur.above += dt;
                if cycle_accum_valid {
                    above_regen += dt;
                }
            } else {
                cur.q[n - 1] += dt;
            }
            if service_end.is_finite() && law == Law::B2 {
                cur.b2_service += dt;
            }
        }
        t = t_next;

        if next_arrival <= service_end {
            // batch arrival
            let b = sample_batch(&mut s.batches, m.batches.probs());
            let was_empty = n == 0;
            n += b;
            next_arrival = t + sample_exp(&mut s.arrivals, m.lambda);
            if was_empty {
                // busy period begins; first customer served by B1
                in_busy = true;
                cyc_start = t;
                cyc = Cycle { length: 0.0, nu1: 0, nu2: 0, t1: 0.0, t2: 0.0 };
                cycle_accum_valid = measuring;
                law = Law::B1;
                service_start_t = t;
                service_end = t + sample_service(&mut s.services, &m.b1);
            }
        } else {
            // service completion
            let dur = t - service_start_t;
            match law {
                Law::B1 => {
                    cyc.nu1 += 1;
                    cyc.t1 += dur;
                }
                Law::B2 => {
                    cyc.nu2 += 1;
                    cyc.t2 += dur;
                }
            }
            n -= 1;
            if n == 0 {
                service_end = f64::INFINITY;
                if in_busy {
                    cyc.length = t - cyc_start;
                    if cycle_accum_valid && measuring {
                        cycles.push(std::mem::replace(
                            &mut cyc,
                            Cycle { length: 0.0, nu1: 0, nu2: 0, t1: 0.0, t2: 0.0 },
                        ));
                    }
                    in_busy = false;
                }
            } else {
                // queue length immediately before the next service start,
                // including the customer entering service, is n.
                law = if n > level { Law::B2 } else { Law::B1 };
                service_start_t = t;
                let dist = if law == Law::B2 { &m.b2 } else { &m.b1 };
                service_end = t + sample_service(&mut s.services, dist);
            }
        }
        events += 1;

        if !measuring {
            let warm_done = match cfg.horizon {
                Horizon::Events(_) => events >= warm_budget,
                Horizon::Time(_) => t >= warm_time,
            };
            if warm_done {
                measuring = true;
                measure_start_ev = events;
                measure_start_t = t;
                cycle_accum_valid = false; // current cycle straddles warmup
            }
        } else {
            let window_full = match cfg.horizon {
                Horizon::Events(_) => events - measure_start_ev >= per_window_ev,
                Horizon::Time(_) => t - measure_start_t >= per_window_time,
            };
            if window_full && windows.len() < N_BATCHES {
                windows.push(std::mem::replace(&mut cur, Window::new(level)));
                measure_start_ev = events;
                measure_start_t = t;
            }
        }
    }
    if cur.time > 0.0 {
        windows.push(cur);
    }

    let est = |pick: &dyn Fn(&Window) -> f64| -> Estimate {
        let total_time: f64 = windows.iter().map(|w| w.time).sum();
        let total: f64 = windows.iter().map(pick).sum();
        let value = total / total_time;
        // batch means over the windows
        let means: Vec<f64> = windows
            .iter()
            .filter(|w| w.time > 0.0)
            .map(|w| pick(w) / w.time)
            .collect();
        let k = means.len() as f64;
        let mean = means.iter().sum::<f64>() / k;
        let var = means.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0).max(1.0);
        Estimate { value, se: (var / k).sqrt() }
    };

    let p1_hat = est(&|w: &Window| w.idle);
    let p2_hat = est(&|w: &Window| w.above);
    let p2_service_hat = est(&|w: &Window| w.b2_service);
    let q_hat: Vec<Estimate> = (0..level).map(|i| est(&|w: &Window| w.q[i])).collect();

    // busy-period statistics
    let scalar = |pick: &dyn Fn(&Cycle) -> f64| -> Estimate {
        let k = cycles.len() as f64;
        if cycles.is_empty() {
            return Estimate { value: f64::NAN, se: f64::NAN };
        }
        let mean = cycles.iter().map(pick).sum::<f64>() / k;
        let var =
            cycles.iter().map(|c| (pick(c) - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        Estimate { value: mean, se: (var / k).sqrt() }
    };
    let mean_busy = scalar(&|c| c.length);
    let mean_nu1 = scalar(&|c| c.nu1 as f64);
    let mean_nu2 = scalar(&|c| c.nu2 as f64);
    let mean_t1 = scalar(&|c| c.t1);
    let mean_t2 = scalar(&|c| c.t2);
    let es = m.batches.mean();
    let wald_gap = m.lambda * es * (mean_busy.value + 1.0 / m.lambda)
        - (mean_nu1.value + mean_nu2.value);

    // renewal-reward estimates over completed measured cycles (reward per
    // cycle / cycle length incl. the idle gap 1/lambda estimated by the
    // accumulated idle time before the next busy period)
    let cycle_time: f64 = cycles.iter().map(|c| c.length).sum::<f64>() + idle_regen;
    let p1_regen = if cycle_time > 0.0 { idle_regen / cycle_time } else { f64::NAN };
    let p2_regen = if cycle_time > 0.0 { above_regen / cycle_time } else { f64::NAN };

    Ok(SimEstimate {
        p1_hat,
        p2_hat,
        p2_service_hat,
        q_hat,
        busy: BusyStats {
            mean_busy_period: mean_busy,
            mean_nu1,
            mean_nu2,
            mean_t1,
            mean_t2,
            cycles: cycles.len() as u64,
            wald_gap,
        },
        events,
        sim_time: t,
        p1_regen,
        p2_regen,
    })
}

/// Busy-period statistics only (same pass as [`simulate`]).
pub fn busy_period_stats(cfg: &SimConfig) -> Result<BusyStats> {
    Ok(simulate(cfg)?.busy)
}
