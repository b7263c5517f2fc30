//! Result records emitted by each command, plus the three renderers
//! (pretty table, CSV with header, JSON with a schema-version field).

use damq_core::asymptotics::{AsympP1P2, Regime, RootResult};
use damq_core::objective::{ControlSolution, ObjectiveValue};
use damq_core::sim::SimEstimate;
use damq_core::stationary::StationaryResult;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Top-level JSON wrapper; every emitted document carries the schema
/// version and the producing command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub command: String,
    pub result: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Pretty,
    Csv,
    Json,
}

pub trait Report: Serialize + DeserializeOwned {
    const COMMAND: &'static str;
    fn csv(&self) -> String;
    fn pretty(&self) -> String;

    fn render(&self, format: Format) -> String {
        match format {
            Format::Pretty => self.pretty(),
            Format::Csv => self.csv(),
            Format::Json => {
                let env = Envelope {
                    schema_version: SCHEMA_VERSION,
                    command: Self::COMMAND.to_string(),
                    result: self,
                };
                let mut s = serde_json::to_string_pretty(&env).expect("serializable report");
                s.push('\n');
                s
            }
        }
    }
}

fn kv_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn kv_pretty(title: &str, rows: &[(String, String)]) -> String {
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = format!("{title}\n");
    for (k, v) in rows {
        out.push_str(&format!("  {k:<width$}  {v}\n"));
    }
    out
}

// ---------------------------------------------------------------- exact

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactReport {
    pub stationary: StationaryResult,
    pub objective: ObjectiveValue,
    pub normalization: f64,
}

impl Report for ExactReport {
    const COMMAND: &'static str = "exact";

    fn csv(&self) -> String {
        let st = &self.stationary;
        let mut rows = vec![
            ("p1".into(), st.p1),
            ("p2".into(), st.p2),
            ("p2_service".into(), st.p2_service),
        ];
        for (i, q) in st.q.iter().enumerate() {
            rows.push((format!("q_{}", i + 1), *q));
        }
        rows.extend([
            ("nu1".into(), st.nu1_l),
            ("nu2".into(), st.nu2_l),
            ("zeta1_mean".into(), st.zeta1_mean),
            ("rho1".into(), st.rho1),
            ("rho2".into(), st.rho2),
            ("normalization".into(), self.normalization),
            ("objective_total".into(), self.objective.total),
            ("damage_lower".into(), self.objective.damage_lower),
            ("damage_upper".into(), self.objective.damage_upper),
            ("water".into(), self.objective.water),
        ]);
        kv_csv(&rows)
    }

    fn pretty(&self) -> String {
        let st = &self.stationary;
        let mut rows = vec![
            ("rho1".to_string(), format!("{:.9}", st.rho1)),
            ("rho2".to_string(), format!("{:.9}", st.rho2)),
            ("p1 (empty)".to_string(), format!("{:.9}", st.p1)),
            ("p2 (level > L)".to_string(), format!("{:.9}", st.p2)),
            ("p2 (B2 service)".to_string(), format!("{:.9}", st.p2_service)),
        ];
        for (i, q) in st.q.iter().enumerate() {
            rows.push((format!("q_{}", i + 1), format!("{q:.9}")));
        }
        rows.extend([
            ("E nu1".to_string(), format!("{:.9}", st.nu1_l)),
            ("E nu2".to_string(), format!("{:.9}", st.nu2_l)),
            ("p1+p2+sum q".to_string(), format!("{:.9}", self.normalization)),
            ("objective J(L)".to_string(), format!("{:.9}", self.objective.total)),
            ("  damage (lower)".to_string(), format!("{:.9}", self.objective.damage_lower)),
            ("  damage (upper)".to_string(), format!("{:.9}", self.objective.damage_upper)),
            ("  water".to_string(), format!("{:.9}", self.objective.water)),
        ]);
        kv_pretty(&format!("exact stationary split (L = {})", st.level), &rows)
    }
}

// ------------------------------------------------------------ asymptotic

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub regime: Regime,
    pub rho1: f64,
    pub rho2: f64,
    /// C = L (rho1 - 1), the finite-L identification of the control value.
    pub c: f64,
    pub kappa: f64,
    pub alpha: f64,
    /// phi (supercritical) or tau (subcritical); absent at criticality.
    pub root: Option<RootResult>,
    pub limit: AsympP1P2,
    /// Heavy-traffic L*p1 and L*p2 at this C.
    pub l_p1: f64,
    pub l_p2: f64,
    /// (t, limit of L q_{L-j} at t = j/L) on a grid.
    pub q_profile: Vec<(f64, f64)>,
}

impl Report for AsymptoticReport {
    const COMMAND: &'static str = "asymptotic";

    fn csv(&self) -> String {
        let mut rows = vec![
            ("rho1".to_string(), self.rho1),
            ("rho2".to_string(), self.rho2),
            ("c".to_string(), self.c),
            ("kappa".to_string(), self.kappa),
            ("alpha".to_string(), self.alpha),
            ("l_p1".to_string(), self.l_p1),
            ("l_p2".to_string(), self.l_p2),
        ];
        if let Some(r) = &self.root {
            rows.push(("root".to_string(), r.root));
            rows.push(("root_residual".to_string(), r.residual));
        }
        match self.limit {
            AsympP1P2::Below { p1, p2 } => {
                rows.push(("p1_limit".to_string(), p1));
                rows.push(("p2_limit".to_string(), p2));
            }
            AsympP1P2::Critical { l_p1, l_p2 } => {
                rows.push(("l_p1_limit".to_string(), l_p1));
                rows.push(("l_p2_limit".to_string(), l_p2));
            }
            AsympP1P2::Above { phi, p1_amplitude, p2 } => {
                rows.push(("phi".to_string(), phi));
                rows.push(("p1_amplitude".to_string(), p1_amplitude));
                rows.push(("p2_limit".to_string(), p2));
            }
        }
        for (t, v) in &self.q_profile {
            rows.push((format!("lq_profile_t{t:.1}"), *v));
        }
        kv_csv(&rows)
    }

    fn pretty(&self) -> String {
        let regime = match self.regime {
            Regime::Below => "subcritical (rho1 < 1)",
            Regime::Critical => "critical (rho1 = 1)",
            Regime::Above => "supercritical (rho1 > 1)",
        };
        let mut rows = vec![
            ("regime".to_string(), regime.to_string()),
            ("rho1".to_string(), format!("{:.9}", self.rho1)),
            ("rho2".to_string(), format!("{:.9}", self.rho2)),
            ("C = L(rho1-1)".to_string(), format!("{:.6}", self.c)),
            ("kappa".to_string(), format!("{:.9}", self.kappa)),
            ("alpha".to_string(), format!("{:.9}", self.alpha)),
        ];
        if let Some(r) = &self.root {
            let name = if matches!(self.regime, Regime::Above) { "phi" } else { "tau" };
            rows.push((name.to_string(), format!("{:.15}", r.root)));
            rows.push(("root residual".to_string(), format!("{:.2e}", r.residual)));
        }
        match self.limit {
            AsympP1P2::Below { p1, p2 } => {
                rows.push(("p1 limit".to_string(), format!("{p1:.9}")));
                rows.push(("p2 limit".to_string(), format!("{p2:.9}")));
            }
            AsympP1P2::Critical { l_p1, l_p2 } => {
                rows.push(("L p1 limit".to_string(), format!("{l_p1:.9}")));
                rows.push(("L p2 limit".to_string(), format!("{l_p2:.9}")));
            }
            AsympP1P2::Above { phi: _, p1_amplitude, p2 } => {
                rows.push(("p1 ~ A phi^L, A".to_string(), format!("{p1_amplitude:.9}")));
                rows.push(("p2 limit".to_string(), format!("{p2:.9}")));
            }
        }
        rows.push(("heavy-traffic L p1".to_string(), format!("{:.9}", self.l_p1)));
        rows.push(("heavy-traffic L p2".to_string(), format!("{:.9}", self.l_p2)));
        for (t, v) in &self.q_profile {
            rows.push((format!("L q profile t={t:.1}"), format!("{v:.9}")));
        }
        kv_pretty("asymptotic regime report", &rows)
    }
}

// -------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateReport {
    pub seed: u64,
    pub events: u64,
    pub sim: SimEstimate,
    /// Exact counterpart, when the model is small enough to compute.
    pub exact: Option<StationaryResult>,
}

impl SimulateReport {
    fn lines(&self) -> Vec<(String, f64, f64, Option<f64>)> {
        let mut rows: Vec<(String, f64, f64, Option<f64>)> = Vec::new();
        let ex = self.exact.as_ref();
        rows.push((
            "p1".into(),
            self.sim.p1_hat.value,
            self.sim.p1_hat.se,
            ex.map(|e| e.p1),
        ));
        rows.push((
            "p2".into(),
            self.sim.p2_hat.value,
            self.sim.p2_hat.se,
            ex.map(|e| e.p2),
        ));
        for (i, q) in self.sim.q_hat.iter().enumerate() {
            rows.push((format!("q_{}", i + 1), q.value, q.se, ex.map(|e| e.q[i])));
        }
        rows.push((
            "nu1".into(),
            self.sim.busy.mean_nu1.value,
            self.sim.busy.mean_nu1.se,
            ex.map(|e| e.nu1_l),
        ));
        rows.push((
            "nu2".into(),
            self.sim.busy.mean_nu2.value,
            self.sim.busy.mean_nu2.se,
            ex.map(|e| e.nu2_l),
        ));
        rows
    }
}

impl Report for SimulateReport {
    const COMMAND: &'static str = "simulate";

    fn csv(&self) -> String {
        let mut out = String::from("quantity,estimate,se,exact,z\n");
        for (name, value, se, exact) in self.lines() {
            match exact {
                Some(e) => {
                    let z = if se > 0.0 { (value - e) / se } else { 0.0 };
                    out.push_str(&format!("{name},{value},{se},{e},{z}\n"));
                }
                None => out.push_str(&format!("{name},{value},{se},,\n")),
            }
        }
        out
    }

    fn pretty(&self) -> String {
        let mut out = format!(
            "simulation estimate (seed {}, {} events, {:.1} time units, {} cycles)\n",
            self.seed, self.sim.events, self.sim.sim_time, self.sim.busy.cycles
        );
        out.push_str(&format!(
            "  {:<8} {:>12} {:>12} {:>12} {:>8}\n",
            "quantity", "estimate", "se", "exact", "z"
        ));
        for (name, value, se, exact) in self.lines() {
            match exact {
                Some(e) => {
                    let z = if se > 0.0 { (value - e) / se } else { 0.0 };
                    out.push_str(&format!(
                        "  {name:<8} {value:>12.6} {se:>12.2e} {e:>12.6} {z:>8.2}\n"
                    ));
                }
                None => out.push_str(&format!("  {name:<8} {value:>12.6} {se:>12.2e}\n")),
            }
        }
        out
    }
}

// -------------------------------------------------------------- optimize

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub solution: ControlSolution,
    pub kappa: f64,
    pub rho2: f64,
    pub evaluations: usize,
}

impl Report for OptimizeReport {
    const COMMAND: &'static str = "optimize";

    fn csv(&self) -> String {
        kv_csv(&[
            ("c_opt".into(), self.solution.c_opt),
            ("objective".into(), self.solution.objective),
            ("kappa".into(), self.kappa),
            ("rho2".into(), self.rho2),
            ("evaluations".into(), self.evaluations as f64),
        ])
    }

    fn pretty(&self) -> String {
        let regime = match self.solution.regime {
            damq_core::objective::ControlRegime::Upper => "upper (C > 0)",
            damq_core::objective::ControlRegime::Critical => "critical (C = 0)",
            damq_core::objective::ControlRegime::Lower => "lower (C < 0)",
        };
        kv_pretty(
            "optimal control",
            &[
                ("c_opt".to_string(), format!("{:.6}", self.solution.c_opt)),
                ("regime".to_string(), regime.to_string()),
                ("objective".to_string(), format!("{:.9}", self.solution.objective)),
                ("kappa".to_string(), format!("{:.9}", self.kappa)),
                ("rho2".to_string(), format!("{:.9}", self.rho2)),
                ("evaluations".to_string(), self.evaluations.to_string()),
            ],
        )
    }
}

// ----------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub c_opt: f64,
    /// Successive difference c_opt[i] - c_opt[i-1] (0 for the first row).
    pub delta: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: String,
    pub rows: Vec<SweepRow>,
}

impl Report for SweepReport {
    const COMMAND: &'static str = "sweep";

    fn csv(&self) -> String {
        let mut out = format!("index,{},c_opt,delta,objective\n", self.param);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.index, r.value, r.c_opt, r.delta, r.objective
            ));
        }
        out
    }

    fn pretty(&self) -> String {
        let mut out = format!("sweep over {}\n", self.param);
        out.push_str(&format!(
            "  {:>5} {:>12} {:>12} {:>12} {:>14}\n",
            "index", self.param, "c_opt", "delta", "objective"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "  {:>5} {:>12.4} {:>12.4} {:>12.4} {:>14.6}\n",
                r.index, r.value, r.c_opt, r.delta, r.objective
            ));
        }
        out
    }
}

// -------------------------------------------------------------- validate

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Module the check exercises; named on failure (exit code 2).
    pub module: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidateReport {
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

impl Report for ValidateReport {
    const COMMAND: &'static str = "validate";

    fn csv(&self) -> String {
        let mut out = String::from("check,module,pass,detail\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},\"{}\"\n",
                c.name, c.module, c.pass, c.detail
            ));
        }
        out
    }

    fn pretty(&self) -> String {
        let mut out = String::from("consistency checks\n");
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("  [{status}] {} ({}): {}\n", c.name, c.module, c.detail));
        }
        out.push_str(if self.pass { "all checks passed\n" } else { "some checks FAILED\n" });
        out
    }
}
