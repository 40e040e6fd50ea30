//! Experiment driver: evaluates baselines, protocols, bounds and certificates
//! over a noise grid and writes a CSV table plus a JSON run manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certificates::{certify_thm1_with, certify_thm2, CertReport, GtildeBasis};
use crate::channels::NoiseModel;
use crate::error::{Error, Result};
use crate::protocols::{
    average_fidelity, average_from_parts, baseline_fidelity, phase2_candidate, symmetric_projection, StateSet,
    SINGLE_STATE_MAX_GAMMA,
};
use crate::sdp::{build_problem, solve, SolverOptions};
use crate::variational::{evaluate, load_params, save_params, train, TrainConfig, TrainReport};

/// Environment variable bounding the grid worker pool.
pub const WORKERS_ENV: &str = "PURIFY_WORKERS";
pub const DEFAULT_GRID: &str = "0:0.4:0.05";
/// Slack of the protocol ordering checks in `figure3`.
pub const ORDERING_SLACK: f64 = 1e-6;
/// Slack of the PPT bound check in `figure3`.
pub const BOUND_SLACK: f64 = 1e-3;
const GRID_ROUNDING: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Baseline,
    Analytic,
    Symmetric,
    Variational,
    PptBound,
    CertifyThm1,
    CertifyThm2,
    Figure3,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Baseline,
        Command::Analytic,
        Command::Symmetric,
        Command::Variational,
        Command::PptBound,
        Command::CertifyThm1,
        Command::CertifyThm2,
        Command::Figure3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Baseline => "baseline",
            Command::Analytic => "analytic",
            Command::Symmetric => "symmetric",
            Command::Variational => "variational",
            Command::PptBound => "ppt-bound",
            Command::CertifyThm1 => "certify-thm1",
            Command::CertifyThm2 => "certify-thm2",
            Command::Figure3 => "figure3",
        }
    }

    /// Admissible noise levels for the command's grid.
    fn domain(self) -> (f64, f64, bool, &'static str) {
        match self {
            Command::Analytic | Command::Figure3 => (0.0, SINGLE_STATE_MAX_GAMMA, true, "[0, 0.4]"),
            Command::CertifyThm1 => (0.0, 1.0, false, "(0, 1)"),
            _ => (0.0, 1.0, true, "[0, 1]"),
        }
    }

    fn is_certificate(self) -> bool {
        matches!(self, Command::CertifyThm1 | Command::CertifyThm2)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// Named state set or a custom list of Schmidt coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SetSpec {
    Bell,
    Sd,
    Alphas(Vec<f64>),
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetSpec::Bell => f.write_str("SB"),
            SetSpec::Sd => f.write_str("Sd"),
            SetSpec::Alphas(a) => {
                let list: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                write!(f, "alpha:{}", list.join(","))
            }
        }
    }
}

impl FromStr for SetSpec {
    type Err = Error;

    /// `SB`, `Sd`, or `alpha:a1,a2,...`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SB" | "sb" | "bell" => Ok(SetSpec::Bell),
            "Sd" | "sd" => Ok(SetSpec::Sd),
            _ => {
                let list = s
                    .strip_prefix("alpha:")
                    .ok_or_else(|| Error::Config(format!("unknown state set {s:?}; use SB, Sd or alpha:a1,a2,...")))?;
                let alphas = list
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad alpha {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SetSpec::Alphas(alphas))
            }
        }
    }
}

impl TryFrom<String> for SetSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SetSpec> for String {
    fn from(s: SetSpec) -> Self {
        s.to_string()
    }
}

/// The states named by `spec`, in declared order.
pub fn emit_set(spec: &SetSpec) -> Result<StateSet> {
    match spec {
        SetSpec::Bell => Ok(StateSet::bell()),
        SetSpec::Sd => Ok(StateSet::sd()),
        SetSpec::Alphas(alphas) => {
            if alphas.is_empty() {
                return Err(Error::Config("empty alpha list".into()));
            }
            StateSet::from_alphas(alphas, spec.to_string())
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Global,
    #[default]
    Bilocal,
}

impl NoiseKind {
    /// Noise of level `gamma`; the bi-local form uses `gamma` on both qubits.
    pub fn model(self, gamma: f64) -> Result<NoiseModel> {
        match self {
            NoiseKind::Global => NoiseModel::global(gamma),
            NoiseKind::Bilocal => NoiseModel::bilocal(gamma, gamma),
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(NoiseKind::Global),
            "bilocal" | "bi-local" => Ok(NoiseKind::Bilocal),
            _ => Err(Error::Config(format!("unknown noise kind {s:?}; use global or bilocal"))),
        }
    }
}

/// Optional replacements for the training defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub penalty_a: Option<f64>,
    pub learning_rate: Option<f64>,
    pub iterations: Option<usize>,
    pub fd_step: Option<f64>,
    pub seed: Option<u64>,
    pub p_min: Option<f64>,
    /// Evaluate saved parameters instead of training.
    pub params_path: Option<PathBuf>,
}

impl TrainOverrides {
    pub fn apply(&self, set: StateSet, noise: NoiseModel) -> TrainConfig {
        let mut c = TrainConfig::new(set, noise);
        if let Some(v) = self.penalty_a {
            c.penalty_a = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.iterations {
            c.iterations = v;
        }
        if let Some(v) = self.fd_step {
            c.fd_step = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        c.p_min = self.p_min;
        c
    }
}

fn default_grid() -> Vec<f64> {
    parse_grid(DEFAULT_GRID).expect("valid default grid")
}

fn default_p_bar() -> f64 {
    0.1
}

fn default_copies() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "default_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_set")]
    pub set: SetSpec,
    #[serde(default)]
    pub noise: NoiseKind,
    #[serde(default = "default_p_bar")]
    pub p_bar: f64,
    /// Number of copies for the symmetric projection.
    #[serde(default = "default_copies")]
    pub copies: usize,
    #[serde(default)]
    pub train: TrainOverrides,
    /// Output stem; files are `<stem>.csv` and `<stem>.manifest.json`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Alternative `G̃` data file for `certify-thm1`.
    #[serde(default)]
    pub gtilde_path: Option<PathBuf>,
}

fn default_set() -> SetSpec {
    SetSpec::Sd
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            gamma_grid: default_grid(),
            set: default_set(),
            noise: NoiseKind::default(),
            p_bar: default_p_bar(),
            copies: default_copies(),
            train: TrainOverrides::default(),
            output: None,
            gtilde_path: None,
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn output_stem(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from(self.command.name()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_grid.is_empty() {
            return Err(Error::Config("empty gamma grid".into()));
        }
        let (lo, hi, closed, range) = self.command.domain();
        for &g in &self.gamma_grid {
            let inside = if closed { g >= lo && g <= hi } else { g > lo && g < hi };
            if !inside {
                return Err(Error::OutOfRange {
                    name: "gamma",
                    value: g,
                    range,
                });
            }
        }
        if !(self.p_bar > 0.0 && self.p_bar <= 1.0) {
            return Err(Error::OutOfRange {
                name: "p_bar",
                value: self.p_bar,
                range: "(0, 1]",
            });
        }
        if !(2..=4).contains(&self.copies) {
            return Err(Error::OutOfRange {
                name: "copies",
                value: self.copies as f64,
                range: "{2, 3, 4}",
            });
        }
        emit_set(&self.set)?;
        Ok(())
    }
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let number = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Config(format!("bad number {t:?} in grid {spec:?}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if !(step > 0.0) || stop < start {
                return Err(Error::Config(format!(
                    "grid {spec:?} needs start <= stop and a positive step"
                )));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n)
                .map(|i| ((start + i as f64 * step) * GRID_ROUNDING).round() / GRID_ROUNDING)
                .collect())
        }
        [list] => list.split(',').map(number).collect(),
        _ => Err(Error::Config(format!("malformed grid {spec:?}"))),
    }
}

/// One row of a curve table; absent columns are left empty in the CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub gamma_effective: f64,
    pub baseline: f64,
    pub analytic: Option<f64>,
    pub symmetric: Option<f64>,
    pub optimized: Option<f64>,
    pub ppt_bound: Option<f64>,
    pub p_bar_achieved: Option<f64>,
}

impl CurvePoint {
    const HEADER: [&'static str; 8] = [
        "gamma",
        "gamma_effective",
        "baseline",
        "analytic",
        "symmetric",
        "optimized",
        "ppt_bound",
        "p_bar_achieved",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            format_number(self.gamma),
            format_number(self.gamma_effective),
            format_number(self.baseline),
            format_optional(self.analytic),
            format_optional(self.symmetric),
            format_optional(self.optimized),
            format_optional(self.ppt_bound),
            format_optional(self.p_bar_achieved),
        ]
    }

    /// Violations of `baseline ≤ analytic ≤ optimized ≤ ppt_bound`.
    pub fn ordering_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, lower: Option<f64>, upper: Option<f64>, slack: f64| {
            if let (Some(l), Some(u)) = (lower, upper) {
                if !(l <= u + slack) {
                    out.push(format!("gamma={}: {name} ({l} > {u})", self.gamma));
                }
            }
        };
        check("baseline <= analytic", Some(self.baseline), self.analytic, ORDERING_SLACK);
        check("analytic <= optimized", self.analytic, self.optimized, ORDERING_SLACK);
        check("optimized <= ppt_bound", self.optimized, self.ppt_bound, BOUND_SLACK);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub gamma: f64,
    pub p_bar: Option<f64>,
    pub bound: f64,
    pub passed: bool,
    pub max_residual: f64,
}

impl CertRow {
    const HEADER: [&'static str; 5] = ["gamma", "p_bar", "bound", "passed", "max_residual"];

    fn record(&self) -> Vec<String> {
        vec![
            format_number(self.gamma),
            format_optional(self.p_bar),
            format_number(self.bound),
            self.passed.to_string(),
            format_number(self.max_residual),
        ]
    }
}

/// 17 significant digits in scientific notation.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn format_optional(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rows {
    Curve(Vec<CurvePoint>),
    Certificates(Vec<CertRow>),
}

/// Everything computed by one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub rows: Rows,
    /// Per-grid-point details for the manifest.
    pub details: Vec<Value>,
    pub ordering_violations: Vec<String>,
    pub certificates_passed: bool,
}

impl RunResult {
    pub fn curve(&self) -> Option<&[CurvePoint]> {
        match &self.rows {
            Rows::Curve(c) => Some(c),
            Rows::Certificates(_) => None,
        }
    }

    pub fn certificates(&self) -> Option<&[CertRow]> {
        match &self.rows {
            Rows::Certificates(c) => Some(c),
            Rows::Curve(_) => None,
        }
    }

    /// The CSV table, header first.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        match &self.rows {
            Rows::Curve(points) => {
                w.write_record(CurvePoint::HEADER).map_err(io)?;
                for p in points {
                    w.write_record(p.record()).map_err(io)?;
                }
            }
            Rows::Certificates(rows) => {
                w.write_record(CertRow::HEADER).map_err(io)?;
                for r in rows {
                    w.write_record(r.record()).map_err(io)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("ascii output"))
    }
}

/// Files written by [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub params_paths: Vec<PathBuf>,
    pub result: RunResult,
}

/// Worker count from the environment; `None` leaves the pool default.
pub fn configured_workers() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

struct PointOutput {
    curve: Option<CurvePoint>,
    cert: Option<CertRow>,
    detail: Value,
    trained: Option<TrainReport>,
}

fn cert_detail(report: &CertReport) -> Value {
    serde_json::to_value(report).unwrap_or(Value::Null)
}

fn evaluate_point(config: &ExperimentConfig, set: &StateSet, basis: &Result<GtildeBasis>, gamma: f64) -> Result<PointOutput> {
    let started = Instant::now();
    let mut detail = json!({ "gamma": gamma });
    let mut out = PointOutput {
        curve: None,
        cert: None,
        detail: Value::Null,
        trained: None,
    };
    match config.command {
        Command::CertifyThm1 => {
            let basis = basis.as_ref().map_err(|e| Error::Gtilde(e.to_string()));
            let report = certify_thm1_with(gamma, basis)?;
            out.cert = Some(CertRow {
                gamma,
                p_bar: None,
                bound: report.bound,
                passed: report.passed(),
                max_residual: report.max_residual(),
            });
            detail["report"] = cert_detail(&report);
        }
        Command::CertifyThm2 => {
            let report = certify_thm2(gamma, config.p_bar)?;
            out.cert = Some(CertRow {
                gamma,
                p_bar: Some(config.p_bar),
                bound: report.bound,
                passed: report.passed(),
                max_residual: report.max_residual(),
            });
            detail["report"] = cert_detail(&report);
        }
        command => {
            let noise = config.noise.model(gamma)?;
            let mut point = CurvePoint {
                gamma,
                gamma_effective: noise.effective_gamma(),
                baseline: baseline_fidelity(set, &noise)?,
                ..CurvePoint::default()
            };
            if matches!(command, Command::Analytic | Command::Figure3) {
                let protocol = phase2_candidate()?.protocol()?;
                let (f, p) = average_fidelity(&protocol, set, &noise, 2)?;
                point.analytic = Some(f);
                point.p_bar_achieved = Some(p);
                detail["analytic_p_bar"] = json!(p);
            }
            if command == Command::Symmetric {
                let parts = set
                    .states()
                    .iter()
                    .map(|psi| {
                        let out = symmetric_projection(&noise.apply(psi)?, config.copies)?;
                        let p = out.success_probability;
                        Ok((p * psi.trace_product(&out.state).re, p))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (f, p) = average_from_parts(&parts)?;
                point.symmetric = Some(f);
                point.p_bar_achieved = Some(p);
            }
            if matches!(command, Command::Variational | Command::Figure3) {
                let train_config = config.train.apply(set.clone(), noise);
                let report = match &config.train.params_path {
                    Some(path) => evaluate(&load_params(path)?, &train_config)?,
                    None => train(&train_config)?,
                };
                point.optimized = Some(report.f_bar);
                point.p_bar_achieved = Some(report.p_bar);
                detail["training"] = json!({
                    "final_cost": report.cost_history.last(),
                    "iterations": report.cost_history.len().saturating_sub(1),
                    "constraint_satisfied": report.constraint_satisfied,
                    "per_state": report.per_state,
                    "params": report.params,
                });
                out.trained = Some(report);
            }
            if matches!(command, Command::PptBound | Command::Figure3) {
                let problem = build_problem(set, &noise, config.p_bar)?;
                let solution = solve(&problem, &SolverOptions::default())?;
                point.ppt_bound = Some(solution.objective);
                detail["sdp"] = json!({
                    "objective_uncertainty": solution.objective_uncertainty,
                    "iterations": solution.iterations,
                    "converged": solution.converged,
                    "residuals": solution.residuals,
                });
            }
            out.curve = Some(point);
        }
    }
    detail["seconds"] = json!(started.elapsed().as_secs_f64());
    out.detail = detail;
    Ok(out)
}

/// Evaluate every grid point, in grid order, without writing files.
pub fn compute(config: &ExperimentConfig) -> Result<(RunResult, Vec<Option<TrainReport>>)> {
    config.validate()?;
    let set = emit_set(&config.set)?;
    let basis = match (&config.command, &config.gtilde_path) {
        (Command::CertifyThm1, Some(path)) => GtildeBasis::from_path(path),
        (Command::CertifyThm1, None) => GtildeBasis::bundled().cloned(),
        _ => Err(Error::Gtilde("not loaded".into())),
    };
    let grid = &config.gamma_grid;
    let eval = || -> Result<Vec<PointOutput>> {
        grid.par_iter()
            .map(|&g| evaluate_point(config, &set, &basis, g))
            .collect()
    };
    let outputs = match configured_workers()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(eval)?,
        None => eval()?,
    };

    let mut details = Vec::with_capacity(outputs.len());
    let mut curve = Vec::new();
    let mut certs = Vec::new();
    let mut trained = Vec::new();
    for o in outputs {
        details.push(o.detail);
        curve.extend(o.curve);
        certs.extend(o.cert);
        trained.push(o.trained);
    }
    let ordering_violations = curve.iter().flat_map(CurvePoint::ordering_violations).collect();
    let certificates_passed = certs.iter().all(|c| c.passed);
    let rows = if config.command.is_certificate() {
        Rows::Certificates(certs)
    } else {
        Rows::Curve(curve)
    };
    Ok((
        RunResult {
            rows,
            details,
            ordering_violations,
            certificates_passed,
        },
        trained,
    ))
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Run the experiment and write `<stem>.csv`, `<stem>.manifest.json` and,
/// for trained protocols, `<stem>.gNN.params.json` per grid point.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let started = Instant::now();
    let (result, trained) = compute(config)?;
    let stem = config.output_stem();
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let csv_path = with_suffix(&stem, ".csv");
    std::fs::write(&csv_path, result.to_csv()?)?;

    let mut params_paths = Vec::new();
    if config.train.params_path.is_none() {
        for (i, report) in trained.iter().enumerate() {
            if let Some(report) = report {
                let path = with_suffix(&stem, &format!(".g{i:02}.params.json"));
                save_params(&path, &report.params)?;
                params_paths.push(path);
            }
        }
    }

    let manifest_path = with_suffix(&stem, ".manifest.json");
    let manifest = json!({
        "command": config.command,
        "config": config,
        "version": env!("CARGO_PKG_VERSION"),
        "workers": configured_workers()?.unwrap_or_else(rayon::current_num_threads),
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "csv": csv_path,
        "params_files": params_paths,
        "certificates_passed": result.certificates_passed,
        "ordering_violations": result.ordering_violations,
        "points": result.details,
    });
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunOutcome {
        csv_path,
        manifest_path,
        params_paths,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("0:0.4:0.05").unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[3], 0.15);
        assert_eq!(g[8], 0.4);
        assert_eq!(parse_grid("0.1, 0.36").unwrap(), vec![0.1, 0.36]);
        assert_eq!(parse_grid("0.2:0.2:0.1").unwrap(), vec![0.2]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("x").is_err());
    }

    #[test]
    fn set_specs() {
        assert_eq!("SB".parse::<SetSpec>().unwrap(), SetSpec::Bell);
        let custom: SetSpec = "alpha:1,0.5".parse().unwrap();
        let set = emit_set(&custom).unwrap();
        assert_eq!(set.len(), 2);
        assert!((set.states()[0].get(0, 0).re - 1.0).abs() < 1e-15);
        assert!(emit_set(&"alpha:1.5".parse().unwrap()).is_err());
        assert!("nope".parse::<SetSpec>().is_err());
        let json = serde_json::to_string(&custom).unwrap();
        assert_eq!(serde_json::from_str::<SetSpec>(&json).unwrap(), custom);
        let bell = emit_set(&SetSpec::Bell).unwrap();
        for (i, a) in bell.states().iter().enumerate() {
            for b in &bell.states()[i + 1..] {
                assert!(a.trace_product(b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn config_validation_and_json() {
        let mut c = ExperimentConfig::new(Command::Analytic);
        c.validate().unwrap();
        c.gamma_grid = vec![0.5];
        assert!(matches!(c.validate(), Err(Error::OutOfRange { .. })));
        let mut c = ExperimentConfig::new(Command::CertifyThm1);
        c.gamma_grid = vec![0.0];
        assert!(c.validate().is_err());
        let parsed: ExperimentConfig =
            serde_json::from_str(r#"{"command":"ppt-bound","set":"SB","noise":"global","gamma_grid":[0.1]}"#).unwrap();
        assert_eq!(parsed.command, Command::PptBound);
        assert_eq!(parsed.set, SetSpec::Bell);
        assert_eq!(parsed.p_bar, 0.1);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"command":"plot"}"#).is_err());
        assert_eq!("figure3".parse::<Command>().unwrap(), Command::Figure3);
    }

    #[test]
    fn number_format_has_seventeen_digits() {
        assert_eq!(format_number(0.73), "7.2999999999999998e-1");
        assert_eq!(format_number(-0.5), "-5.0000000000000000e-1");
        let x = 0.1 + 0.2;
        assert_eq!(format_number(x).parse::<f64>().unwrap(), x);
        assert_eq!(format_number(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn baseline_on_bell_set_is_global_formula() {
        let mut c = ExperimentConfig::new(Command::Baseline);
        c.set = SetSpec::Bell;
        let (result, _) = compute(&c).unwrap();
        for p in result.curve().unwrap() {
            assert!((p.baseline - (1.0 - 0.75 * p.gamma_effective)).abs() < 1e-12);
        }
        let csv = result.to_csv().unwrap();
        assert!(csv.starts_with("gamma,gamma_effective,baseline,analytic"));
        assert_eq!(csv.lines().count(), 10);
    }
}
