//! Scenario configuration, simulation runs and their artifacts.
//!
//! A configuration file is TOML holding one or more `[[scenario]]` tables;
//! unknown keys anywhere are rejected. See `configs/README.md` for the
//! schema.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    fmt_f64, integrate_linear_with, integrate_nonlinear_with, nonlinear_laplacian,
    IntegrationOptions, NonlinearSpec, Trajectory,
};
use crate::graph::{
    build_laplacian, perron_vector, random_strongly_connected, LaplacianMatrix, PerronVector,
    WeightedDigraph,
};
use crate::potential::{AdditiveLyapunov, ConvexPotential};
use crate::scalar::ScalarFn;
use crate::verify::{
    check_conservation, check_dissipation, check_gradient_flow, check_monotone, CheckReport, Mode,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "scenario")]
    pub scenarios: Vec<Scenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub graph: GraphSource,
    pub initial: InitialState,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub dynamics: Dynamics,
    /// Overrides the consensus value `a(x0)` used as `alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub integration: Integration,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSource {
    /// Edge-list file, relative paths resolved against the config file.
    EdgeList { path: PathBuf },
    /// Strongly connected Erdős–Rényi graph, `p = 2 ln n / n`.
    Random {
        n: usize,
        seed: u64,
        #[serde(default = "yes")]
        symmetric: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialState {
    Values {
        values: Vec<f64>,
    },
    /// `base` everywhere except `value` at `index`.
    Spike {
        n: Option<usize>,
        index: usize,
        #[serde(default = "one")]
        value: f64,
        #[serde(default)]
        base: f64,
    },
    UniformRandom {
        lo: f64,
        hi: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// `quadratic`, `entropy` or `gibbs`.
    pub name: String,
    /// Defaults to `alpha n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Defaults to `1 / alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Minimizer of the quadratic; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "ref")]
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Dynamics {
    #[default]
    Linear,
    /// `x' = -L_hf(x) x` with `f`, `h` named as `identity`, `log` or
    /// `power <p>`.
    Nonlinear { f: String, h: String },
    /// `x' = -L ln(x / alpha)`.
    LogLaplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integration {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "yes")]
    pub early_stop: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    /// `trajectory.csv`: `t,x0,...`.
    Trajectory,
    /// `series.csv`: `t,V,Psi_V,dist_consensus_inf`.
    Series,
}

fn default_outputs() -> Vec<Output> {
    vec![Output::Trajectory, Output::Series]
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves edge-list paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for s in &mut cfg.scenarios {
            if let GraphSource::EdgeList { path } = &mut s.graph {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("no [[scenario]] entries".into()));
        }
        let mut names: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate scenario name `{}`", w[0])));
        }
        self.scenarios.iter().try_for_each(Scenario::validate)
    }
}

fn config_err(scenario: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("scenario `{scenario}`: {msg}"))
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| config_err(&self.name, m);
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(err(format!(
                "name `{}` is not a valid directory name",
                self.name
            )));
        }
        if !positive(self.integration.t_end) || !positive(self.integration.dt) {
            return Err(err("t_end and dt must be positive".into()));
        }
        ConvexPotential::by_name(&self.potential.name, 1.0).map_err(|e| err(e.to_string()))?;
        if self.potential.reference.is_some() && self.potential.name != "quadratic" {
            return Err(err("`ref` applies to the quadratic potential only".into()));
        }
        for (key, v) in [
            ("beta", self.potential.beta),
            ("c", self.potential.c),
            ("alpha", self.alpha),
        ] {
            if let Some(v) = v {
                if !positive(v) {
                    return Err(err(format!("{key} must be positive, got {v}")));
                }
            }
        }
        if let Dynamics::Nonlinear { f, h } = &self.dynamics {
            ScalarFn::parse(f).map_err(|e| err(e.to_string()))?;
            ScalarFn::parse(h).map_err(|e| err(e.to_string()))?;
        }
        match &self.initial {
            InitialState::Values { values } if values.is_empty() => {
                return Err(err("initial values are empty".into()))
            }
            InitialState::Values { values } if values.iter().any(|v| !v.is_finite()) => {
                return Err(err("initial values must be finite".into()))
            }
            InitialState::UniformRandom { lo, hi, .. }
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() =>
            {
                return Err(err(format!(
                    "uniform-random needs lo < hi, got [{lo}, {hi}]"
                )))
            }
            _ => {}
        }
        if let GraphSource::Random { n, .. } = self.graph {
            if n < 2 {
                return Err(err(format!("random graph needs n >= 2, got {n}")));
            }
        }
        Ok(())
    }

    pub fn load_graph(&self) -> Result<WeightedDigraph> {
        match &self.graph {
            GraphSource::EdgeList { path } => {
                let text = fs::read_to_string(path).map_err(|e| {
                    config_err(&self.name, format!("cannot read {}: {e}", path.display()))
                })?;
                WeightedDigraph::from_edge_list(&text)
            }
            GraphSource::Random { n, seed, symmetric } => {
                random_strongly_connected(*n, *symmetric, &mut ChaCha8Rng::seed_from_u64(*seed))
            }
        }
    }

    pub fn initial_state(&self, n: usize) -> Result<DVector<f64>> {
        let x = match &self.initial {
            InitialState::Values { values } => DVector::from_column_slice(values),
            InitialState::Spike {
                n: m,
                index,
                value,
                base,
            } => {
                if let Some(m) = m {
                    if *m != n {
                        return Err(config_err(
                            &self.name,
                            format!("spike n = {m} but graph has {n} nodes"),
                        ));
                    }
                }
                if *index >= n {
                    return Err(config_err(
                        &self.name,
                        format!("spike index {index} out of range"),
                    ));
                }
                let mut x = DVector::from_element(n, *base);
                x[*index] = *value;
                x
            }
            InitialState::UniformRandom { lo, hi, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                DVector::from_fn(n, |_, _| rng.random_range(*lo..*hi))
            }
        };
        if x.len() != n {
            return Err(config_err(
                &self.name,
                format!(
                    "initial state has {} entries but graph has {n} nodes",
                    x.len()
                ),
            ));
        }
        Ok(x)
    }
}

/// Rows `t, V, Psi_V, dist_consensus_inf` of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub psi: Vec<f64>,
    pub dist: Vec<f64>,
}

impl Series {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,V,Psi_V,dist_consensus_inf\n");
        for k in 0..self.t.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(self.t[k]),
                fmt_f64(self.v[k]),
                fmt_f64(self.psi[k]),
                fmt_f64(self.dist[k])
            ));
        }
        out
    }

    /// Largest single-step increase of `V` (non-positive when monotone).
    pub fn max_v_increase(&self) -> f64 {
        max_increase(&self.v)
    }

    pub fn max_psi_increase(&self) -> f64 {
        max_increase(&self.psi)
    }
}

fn max_increase(v: &[f64]) -> f64 {
    v.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn series_with<F>(traj: &Trajectory, v: &AdditiveLyapunov, rate: F) -> Result<Series>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut s = Series {
        t: traj.times().to_vec(),
        v: Vec::with_capacity(traj.len()),
        psi: Vec::with_capacity(traj.len()),
        dist: Vec::with_capacity(traj.len()),
    };
    for (k, x) in traj.states().iter().enumerate() {
        s.v.push(v.value(x)?);
        s.psi.push(v.gradient(x)?.dot(&rate(x)?));
        s.dist.push(traj.distance_to_consensus(k));
    }
    Ok(s)
}

/// Series along `x' = -L x`, with `Psi_V = grad V . L x = -dV/dt`.
pub fn emit_series(traj: &Trajectory, v: &AdditiveLyapunov, l: &LaplacianMatrix) -> Result<Series> {
    series_with(traj, v, |x| l.apply(x))
}

/// Series along `x' = -L_hf(x) x`, with `Psi_V = grad V . L_hf(x) x`.
pub fn emit_series_nonlinear(
    traj: &Trajectory,
    v: &AdditiveLyapunov,
    l: &LaplacianMatrix,
    spec: &NonlinearSpec,
) -> Result<Series> {
    series_with(traj, v, |x| Ok(nonlinear_laplacian(l, spec, x)? * x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCertificate {
    pub v_non_increasing: bool,
    pub v_max_increase: f64,
    pub psi_non_increasing: bool,
    pub psi_max_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub n: usize,
    pub consensus_value: f64,
    pub alpha: f64,
    pub final_time: f64,
    pub stopped_early: Option<f64>,
    pub terminal_distance: f64,
    pub series: SeriesCertificate,
    pub checks: Vec<CheckReport>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Everything a run computes, before any file is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub series: Series,
    pub report: RunReport,
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path.file_name().and_then(|f| f.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Integrates a scenario and evaluates its checks without touching disk.
pub fn simulate(s: &Scenario) -> Result<RunOutcome> {
    s.validate()?;
    let g = s.load_graph()?;
    let l = build_laplacian(&g);
    let n = l.n();
    let x0 = s.initial_state(n)?;
    let q = perron_vector(&l)?;
    let a = q.as_vector().dot(&x0);
    let alpha = s.alpha.unwrap_or(a);

    let h = ConvexPotential::by_name(&s.potential.name, s.potential.reference.unwrap_or(1.0))?;
    if !(alpha > 0.0) && (s.potential.c.is_none() || s.potential.beta.is_none()) {
        return Err(config_err(
            &s.name,
            format!("consensus value {alpha} is not positive; set alpha or both beta and c"),
        ));
    }
    let beta = s.potential.beta.unwrap_or(alpha * n as f64);
    let c = s.potential.c.unwrap_or(1.0 / alpha);
    let v = AdditiveLyapunov::new(beta, c, q.clone(), h.clone())?;
    // domain errors surface here, naming the offending index
    v.value(&x0)?;

    let opts = IntegrationOptions {
        early_stop: s.integration.early_stop,
    };
    let (t_end, dt) = (s.integration.t_end, s.integration.dt);
    let (traj, series) = match &s.dynamics {
        Dynamics::Linear => {
            let traj = integrate_linear_with(&l, &x0, t_end, dt, &opts)?;
            let series = emit_series(&traj, &v, &l)?;
            (traj, series)
        }
        Dynamics::Nonlinear { .. } | Dynamics::LogLaplacian => {
            let spec = match &s.dynamics {
                Dynamics::Nonlinear { f, h } => {
                    NonlinearSpec::new(ScalarFn::parse(f)?, ScalarFn::parse(h)?, alpha)?
                }
                _ => NonlinearSpec::log_laplacian(alpha)?,
            };
            let traj = integrate_nonlinear_with(&l, &spec, &x0, t_end, dt, &opts)?;
            let series = emit_series_nonlinear(&traj, &v, &l, &spec)?;
            (traj, series)
        }
    };

    let mode = Mode::Normal;
    let mut checks = Vec::new();
    let linear = matches!(s.dynamics, Dynamics::Linear);
    if traj.len() >= 2 && (linear || l.is_symmetric()) {
        checks.push(check_conservation(&traj, traj.weights(), mode)?);
    }
    if traj.len() >= 2 {
        let stride = ((0.1 / dt).round() as usize).max(1);
        checks.push(check_monotone(&v, &traj.subsample(stride), mode)?);
    }
    if linear && l.is_symmetric() && traj.len() >= 3 && q == PerronVector::uniform(n) {
        checks.push(check_dissipation(&l, &v, &traj, mode)?);
    }
    if l.is_symmetric() && h.in_domain(1.0) && x0.iter().all(|&xi| h.in_domain(xi / alpha)) {
        checks.push(check_gradient_flow(&l, &h, &x0, alpha, mode)?.with_context("[x0]"));
    }

    let report = RunReport {
        scenario: s.clone(),
        n,
        consensus_value: a,
        alpha,
        final_time: traj.final_time(),
        stopped_early: traj.stopped_early(),
        terminal_distance: traj.distance_to_consensus(traj.len() - 1),
        series: SeriesCertificate {
            v_non_increasing: series.max_v_increase() <= 0.0,
            v_max_increase: series.max_v_increase().max(0.0),
            psi_non_increasing: series.max_psi_increase() <= 0.0,
            psi_max_increase: series.max_psi_increase().max(0.0),
        },
        checks,
        files: Vec::new(),
    };
    Ok(RunOutcome {
        trajectory: traj,
        series,
        report,
    })
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const REPORT_FILE: &str = "report.json";

/// Runs a scenario and writes its artifacts under `out_dir/<name>/`.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let mut outcome = simulate(s)?;
    let dir = out_dir.join(&s.name);
    let mut files = Vec::new();
    for o in &s.outputs {
        let (file, body) = match o {
            Output::Trajectory => (TRAJECTORY_FILE, outcome.trajectory.to_csv()),
            Output::Series => (SERIES_FILE, outcome.series.to_csv()),
        };
        let path = dir.join(file);
        if !files.contains(&path) {
            write_atomic(&path, body.as_bytes())?;
            files.push(path);
        }
    }
    let report_path = dir.join(REPORT_FILE);
    files.push(report_path.clone());
    outcome.report.files = files;
    let json = serde_json::to_string_pretty(&outcome.report)
        .map_err(|e| Error::InvalidArgument(format!("report serialization: {e}")))?;
    write_atomic(&report_path, format!("{json}\n").as_bytes())?;
    Ok(outcome.report)
}

/// Runs every scenario concurrently; results keep config order.
pub fn run_batch(cfg: &ScenarioConfig, out_dir: &Path) -> Vec<(String, Result<RunReport>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .scenarios
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    scope.spawn(move || run_scenario(s, out_dir)),
                )
            })
            .collect();
        handles
            .into_iter()
            .map(|(name, h)| (name, h.join().expect("scenario thread panicked")))
            .collect()
    })
}

/// Reads `report.json` from `dir` itself or from each of its immediate
/// subdirectories, sorted by path.
pub fn load_reports(dir: &Path) -> Result<Vec<(PathBuf, RunReport)>> {
    let read = |p: &Path| -> Result<RunReport> {
        let text = fs::read_to_string(p)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
    };
    let direct = dir.join(REPORT_FILE);
    if direct.is_file() {
        return Ok(vec![(direct.clone(), read(&direct)?)]);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path().join(REPORT_FILE))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no {REPORT_FILE} under {}",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|p| read(&p).map(|r| (p, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
[[scenario]]
name = "two-node"
graph = { kind = "random", n = 4, seed = 3 }
initial = { pattern = "values", values = [2.0, 0.5, 1.0, 1.5] }
potential = { name = "gibbs" }
integration = { t_end = 1.0, dt = 0.01 }
"#;

    #[test]
    fn parses_and_defaults() {
        let cfg = ScenarioConfig::parse(DEMO).unwrap();
        let s = &cfg.scenarios[0];
        assert_eq!(s.dynamics, Dynamics::Linear);
        assert_eq!(s.outputs, default_outputs());
        assert!(s.integration.early_stop);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = DEMO.replace("dt = 0.01", "dt = 0.01, dtt = 1");
        assert!(matches!(ScenarioConfig::parse(&bad), Err(Error::Config(_))));
        let bad = DEMO.replace("seed = 3", "seed = 3, sed = 1");
        assert!(matches!(ScenarioConfig::parse(&bad), Err(Error::Config(_))));
        let bad = format!("{DEMO}\nextra = 1\n");
        assert!(ScenarioConfig::parse(&bad).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for (from, to) in [
            ("dt = 0.01", "dt = -0.01"),
            ("\"gibbs\"", "\"cosh\""),
            ("n = 4", "n = 1"),
        ] {
            let bad = DEMO.replace(from, to);
            assert!(
                matches!(ScenarioConfig::parse(&bad), Err(Error::Config(_))),
                "{to}"
            );
        }
        let bad = DEMO.replace(
            "integration",
            "dynamics = { kind = \"nonlinear\", f = \"identity\", h = \"exp\" }\nintegration",
        );
        assert!(matches!(ScenarioConfig::parse(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn simulate_is_deterministic() {
        let cfg = ScenarioConfig::parse(DEMO).unwrap();
        let a = simulate(&cfg.scenarios[0]).unwrap();
        let b = simulate(&cfg.scenarios[0]).unwrap();
        assert_eq!(a.trajectory.to_csv(), b.trajectory.to_csv());
        assert_eq!(a.series.to_csv(), b.series.to_csv());
        assert!(a.report.passed(), "{:?}", a.report.checks);
        assert!(a.report.series.v_non_increasing);
    }

    #[test]
    fn consensus_series_is_flat() {
        let text = DEMO.replace("[2.0, 0.5, 1.0, 1.5]", "[1.0, 1.0, 1.0, 1.0]");
        let out = simulate(&ScenarioConfig::parse(&text).unwrap().scenarios[0]).unwrap();
        assert!(out.series.v.iter().all(|&v| v == 0.0));
        assert!(out.series.psi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn entropy_zero_component_is_domain_error() {
        let text = DEMO
            .replace("[2.0, 0.5, 1.0, 1.5]", "[2.0, 0.0, 1.0, 1.5]")
            .replace("\"gibbs\"", "\"entropy\"");
        let err = simulate(&ScenarioConfig::parse(&text).unwrap().scenarios[0]).unwrap_err();
        assert!(matches!(err, Error::Domain { index: 1, .. }), "{err}");
    }

    #[test]
    fn spike_and_random_initial_states() {
        let text = DEMO.replace(
            "{ pattern = \"values\", values = [2.0, 0.5, 1.0, 1.5] }",
            "{ pattern = \"spike\", index = 2, value = 4.0 }",
        );
        let s = &ScenarioConfig::parse(&text).unwrap().scenarios[0];
        assert_eq!(
            s.initial_state(4).unwrap().as_slice(),
            &[0.0, 0.0, 4.0, 0.0]
        );
        assert!(s.initial_state(2).is_err());
        let text = DEMO.replace(
            "{ pattern = \"values\", values = [2.0, 0.5, 1.0, 1.5] }",
            "{ pattern = \"uniform-random\", lo = 0.5, hi = 2.0, seed = 9 }",
        );
        let s = &ScenarioConfig::parse(&text).unwrap().scenarios[0];
        let x = s.initial_state(6).unwrap();
        assert_eq!(x, s.initial_state(6).unwrap());
        assert!(x.iter().all(|&v| (0.5..2.0).contains(&v)));
    }
}
