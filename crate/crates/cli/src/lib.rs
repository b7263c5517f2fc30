//! Command-line front end for the threshold-queue (large dam) computations:
//! exact stationary split, asymptotic regime reports, simulation with exact
//! side-by-side comparison, control optimization, parameter sweeps, and a
//! cross-module consistency check.

pub mod config;
pub mod report;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use damq_core::asymptotics::{
    asymp_p1_p2, asymp_q_profile, heavy_traffic_p1_p2, solve_phi, solve_tau, HeavyTrafficParams,
    Regime,
};
use damq_core::objective::{exact_objective, optimize_control};
use damq_core::sim::{simulate, Horizon, SimConfig};
use damq_core::stationary::exact_stationary;
use damq_core::DamModel;

use config::FileConfig;
use report::{
    AsymptoticReport, CheckOutcome, ExactReport, Format, OptimizeReport, Report, SimulateReport,
    SweepReport, SweepRow, ValidateReport,
};

/// Errors mapped onto the exit-code contract: 1 for configuration problems
/// (with a file/field diagnostic), 2 for numerical failures (naming the
/// module the failure originated in).
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical { module: &'static str, message: String },
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical { .. } => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical { module, message } => {
                write!(f, "numerical failure in {module}: {message}")
            }
        }
    }
}

impl From<damq_core::Error> for CliError {
    fn from(e: damq_core::Error) -> Self {
        use damq_core::Error as E;
        match e {
            E::Model(m) => CliError::Config(format!("model invariant: {m}")),
            E::Domain(m) => CliError::Numerical { module: "stochastic-model", message: m },
            E::NoRoot(m) | E::Regime(m) => CliError::Numerical { module: "asymptotics", message: m },
            E::Truncation(m) => CliError::Numerical { module: "busy-period", message: m },
            E::Numerical(m) => CliError::Numerical { module: "stationary", message: m },
            E::Search(m) => CliError::Numerical { module: "objective-control", message: m },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "damq", about = "threshold-modulated M^X/G/1 dam model toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Model configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value before validation, e.g. --set damage.j2=1.1
    #[arg(long = "set", value_name = "KEY.PATH=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum, default_value = "pretty")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact stationary probabilities and the finite-L objective.
    Exact(CommonArgs),
    /// Regime report: phi/tau roots, heavy-traffic p1/p2, interior profile.
    Asymptotic(CommonArgs),
    /// Discrete-event simulation with exact comparison where feasible.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of events to simulate.
        #[arg(long, default_value_t = 1_000_000)]
        events: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Warmup fraction discarded before measuring.
        #[arg(long, default_value_t = 0.05)]
        warmup: f64,
    },
    /// Minimize the limiting objective over the control parameter C.
    Optimize(CommonArgs),
    /// Re-optimize across a grid of one scalar config value.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Dotted config path of the value to vary, e.g. damage.j2
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        /// Also write an "x y" data file of (param, c_opt) pairs.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run the cross-module consistency suite on the model.
    Validate(CommonArgs),
}

pub struct RunOutput {
    pub text: String,
    pub status: i32,
    /// Stderr diagnostic accompanying a nonzero status.
    pub diagnostic: Option<String>,
}

impl RunOutput {
    fn ok(text: String) -> Self {
        RunOutput { text, status: 0, diagnostic: None }
    }
}

/// Heavy-traffic parameter pack derived from a concrete model: batch
/// moments as-is, second-moment load normalized to the critical point
/// (rho12 scales as rho1^2 in lambda).
fn ht_from_model(m: &DamModel, c: f64) -> Result<HeavyTrafficParams, CliError> {
    let es = m.batches.mean();
    let es2 = m.batches.moment(2);
    let rho12_limit = m.rho12() / (m.rho1() * m.rho1());
    Ok(HeavyTrafficParams::new(c, rho12_limit, es, es2)?)
}

fn regime_of(m: &DamModel) -> Regime {
    let rho1 = m.rho1();
    if (rho1 - 1.0).abs() <= 1e-9 {
        Regime::Critical
    } else if rho1 < 1.0 {
        Regime::Below
    } else {
        Regime::Above
    }
}

pub fn run(cli: Cli) -> Result<RunOutput, CliError> {
    match cli.command {
        Command::Exact(common) => {
            let model = load_model(&common)?;
            let report = run_exact(&model)?;
            Ok(RunOutput::ok(report.render(common.format)))
        }
        Command::Asymptotic(common) => {
            let model = load_model(&common)?;
            let report = run_asymptotic(&model)?;
            Ok(RunOutput::ok(report.render(common.format)))
        }
        Command::Simulate { common, events, seed, warmup } => {
            let model = load_model(&common)?;
            let report = run_simulate(&model, events, seed, warmup)?;
            Ok(RunOutput::ok(report.render(common.format)))
        }
        Command::Optimize(common) => {
            let (cfg, model) = load_config_and_model(&common)?;
            let report = run_optimize(&cfg, &model)?;
            Ok(RunOutput::ok(report.render(common.format)))
        }
        Command::Sweep { common, param, from, to, step, plot } => {
            let report = run_sweep(&common, &param, from, to, step)?;
            if let Some(path) = plot {
                let mut data = String::new();
                for r in &report.rows {
                    data.push_str(&format!("{} {}\n", r.value, r.c_opt));
                }
                std::fs::write(&path, data)
                    .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(RunOutput::ok(report.render(common.format)))
        }
        Command::Validate(common) => {
            let model = load_model(&common)?;
            let report = run_validate(&model)?;
            let text = report.render(common.format);
            if report.pass {
                Ok(RunOutput::ok(text))
            } else {
                let first = report.checks.iter().find(|c| !c.pass).unwrap();
                Ok(RunOutput {
                    text,
                    status: 2,
                    diagnostic: Some(format!(
                        "validate: check '{}' failed in module {}: {}",
                        first.name, first.module, first.detail
                    )),
                })
            }
        }
    }
}

fn load_config_and_model(common: &CommonArgs) -> Result<(FileConfig, DamModel), CliError> {
    let path = common
        .config
        .to_str()
        .ok_or_else(|| CliError::config("config path is not valid UTF-8"))?;
    let cfg = config::load_config(path, &common.set)?;
    let model = cfg.build_model()?;
    Ok((cfg, model))
}

fn load_model(common: &CommonArgs) -> Result<DamModel, CliError> {
    Ok(load_config_and_model(common)?.1)
}

pub fn run_exact(model: &DamModel) -> Result<ExactReport, CliError> {
    let stationary = exact_stationary(model)?;
    let objective = exact_objective(model, &stationary);
    let normalization = stationary.normalization();
    Ok(ExactReport { stationary, objective, normalization })
}

pub fn run_asymptotic(model: &DamModel) -> Result<AsymptoticReport, CliError> {
    let regime = regime_of(model);
    let c = model.level as f64 * (model.rho1() - 1.0);
    let ht = ht_from_model(model, c)?;
    let root = match regime {
        Regime::Above => Some(solve_phi(model)?),
        Regime::Below => Some(solve_tau(model, 1e6)?),
        Regime::Critical => None,
    };
    let limit = asymp_p1_p2(model, regime)?;
    let (l_p1, l_p2) = heavy_traffic_p1_p2(&ht, model.rho2());
    let mut q_profile = Vec::new();
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        q_profile.push((t, asymp_q_profile(&ht, t, regime)?));
    }
    Ok(AsymptoticReport {
        regime,
        rho1: model.rho1(),
        rho2: model.rho2(),
        c,
        kappa: ht.kappa,
        alpha: ht.alpha(),
        root,
        limit,
        l_p1,
        l_p2,
        q_profile,
    })
}

pub fn run_simulate(
    model: &DamModel,
    events: u64,
    seed: u64,
    warmup: f64,
) -> Result<SimulateReport, CliError> {
    let cfg = SimConfig {
        model: model.clone(),
        horizon: Horizon::Events(events),
        seed,
        warmup,
    };
    let sim = simulate(&cfg)?;
    // The exact pipeline is cheap up to moderate thresholds; skip it for
    // very tall models rather than stall a simulation run.
    let exact = if model.level <= 10_000 { Some(exact_stationary(model)?) } else { None };
    Ok(SimulateReport { seed, events, sim, exact })
}

pub fn run_optimize(cfg: &FileConfig, model: &DamModel) -> Result<OptimizeReport, CliError> {
    let ht = ht_from_model(model, 0.0)?;
    let (j1, j2) = model.damage;
    let solution = optimize_control(
        &ht,
        model.rho2(),
        j1,
        j2,
        &model.costs,
        (cfg.control.c_min, cfg.control.c_max, cfg.control.tol),
    )?;
    let evaluations = solution.trace.len();
    Ok(OptimizeReport { solution, kappa: ht.kappa, rho2: model.rho2(), evaluations })
}

pub fn run_sweep(
    common: &CommonArgs,
    param: &str,
    from: f64,
    to: f64,
    step: f64,
) -> Result<SweepReport, CliError> {
    if !(step > 0.0 && to >= from) {
        return Err(CliError::config(format!(
            "sweep grid needs step > 0 and to >= from (got from={from}, to={to}, step={step})"
        )));
    }
    let n = ((to - from) / step + 1.5) as usize;
    let grid: Vec<f64> = (0..n).map(|i| from + step * i as f64).filter(|v| *v <= to + step * 1e-9).collect();
    // Rows evaluate independently in parallel; collect() keeps grid order.
    let results: Result<Vec<(usize, f64, f64, f64)>, CliError> = grid
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let mut overrides = common.set.clone();
            overrides.push(format!("{param}={value}"));
            let local = CommonArgs { set: overrides, ..common.clone() };
            let (cfg, model) = load_config_and_model(&local)?;
            let report = run_optimize(&cfg, &model)?;
            Ok((index, value, report.solution.c_opt, report.solution.objective))
        })
        .collect();
    let mut rows = Vec::new();
    let mut prev = None;
    for (index, value, c_opt, objective) in results? {
        let delta = prev.map_or(0.0, |p: f64| c_opt - p);
        prev = Some(c_opt);
        rows.push(SweepRow { index, value, c_opt, delta, objective });
    }
    Ok(SweepReport { param: param.to_string(), rows })
}

pub fn run_validate(model: &DamModel) -> Result<ValidateReport, CliError> {
    let mut checks = Vec::new();
    let mut check = |name: &str, module: &str, pass: bool, detail: String| {
        checks.push(CheckOutcome {
            name: name.to_string(),
            module: module.to_string(),
            pass,
            detail,
        });
    };
    let st = exact_stationary(model)?;
    let norm = st.normalization();
    check(
        "normalization",
        "stationary",
        (norm - 1.0).abs() <= 1e-9,
        format!("p1+p2+sum q = {norm:.12}"),
    );
    let es = model.batches.mean();
    let cycle = es + model.rho1() * st.nu1_l + model.rho2() * st.nu2_l;
    let rel = (cycle - st.nu_total()).abs() / st.nu_total();
    check(
        "cycle identity",
        "stationary",
        rel <= 1e-9,
        format!("Es + rho1 nu1 + rho2 nu2 vs nu_total, relative gap {rel:.2e}"),
    );
    let et = st.nu1_l * model.b1.mean() + st.nu2_l * model.b2.mean();
    let wald = model.lambda * es * (et + 1.0 / model.lambda);
    let wald_rel = (wald - st.nu_total()).abs() / st.nu_total();
    check(
        "Wald balance",
        "stationary",
        wald_rel <= 1e-9,
        format!("lambda Es (ET + 1/lambda) vs nu_total, relative gap {wald_rel:.2e}"),
    );
    match regime_of(model) {
        Regime::Above => {
            let r = solve_phi(model)?;
            check(
                "phi root residual",
                "asymptotics",
                r.residual.abs() <= 1e-12,
                format!("phi = {:.12}, residual {:.2e}", r.root, r.residual),
            );
        }
        Regime::Below => {
            let r = solve_tau(model, 1e6)?;
            check(
                "tau root residual",
                "asymptotics",
                r.residual.abs() <= 1e-12,
                format!("tau = {:.12}, residual {:.2e}", r.root, r.residual),
            );
        }
        Regime::Critical => {}
    }
    // Short fixed-seed simulation: time averages within 5 SE of exact.
    let cfg = SimConfig {
        model: model.clone(),
        horizon: Horizon::Events(1_000_000),
        seed: 1,
        warmup: 0.05,
    };
    let sim = simulate(&cfg)?;
    let band1 = 5.0 * sim.p1_hat.se + 1e-9;
    check(
        "simulation p1",
        "simulator",
        (sim.p1_hat.value - st.p1).abs() <= band1,
        format!("sim {:.6} vs exact {:.6} (5 SE band {band1:.2e})", sim.p1_hat.value, st.p1),
    );
    let band_nu1 = 5.0 * sim.busy.mean_nu1.se + 1e-9;
    check(
        "simulation nu1",
        "simulator",
        (sim.busy.mean_nu1.value - st.nu1_l).abs() <= band_nu1,
        format!(
            "sim {:.6} vs exact {:.6} (5 SE band {band_nu1:.2e})",
            sim.busy.mean_nu1.value, st.nu1_l
        ),
    );
    // The analytic q_i/p2 identify time at a level with busy-period
    // service-time increments; that identification is the time-stationary
    // law exactly when services are memoryless, so the occupancy
    // comparison applies to exponential models only.
    let memoryless = matches!(model.b1, damq_core::ServiceDistribution::Exponential { .. })
        && matches!(model.b2, damq_core::ServiceDistribution::Exponential { .. });
    if memoryless {
        let band2 = 5.0 * sim.p2_hat.se + 1e-9;
        check(
            "simulation p2",
            "simulator",
            (sim.p2_hat.value - st.p2).abs() <= band2,
            format!("sim {:.6} vs exact {:.6} (5 SE band {band2:.2e})", sim.p2_hat.value, st.p2),
        );
        let worst = sim
            .q_hat
            .iter()
            .zip(&st.q)
            .map(|(hat, &exact)| (hat.value - exact).abs() / (5.0 * hat.se + 1e-9))
            .fold(0.0f64, f64::max);
        check(
            "simulation q",
            "simulator",
            worst <= 1.0,
            format!("worst level-occupancy deviation {worst:.2} of the 5 SE band"),
        );
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ValidateReport { checks, pass })
}
