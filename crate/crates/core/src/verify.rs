//! Named, reproducible checks of the consensus identities, each producing a
//! [`CheckReport`] with its residual and the fixed tolerance it was held to.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{
    flow_map, integrate_linear, integrate_nonlinear, stability_bound, NonlinearSpec, Trajectory,
};
use crate::graph::{
    build_laplacian, perron_vector, random_strongly_connected, LaplacianMatrix, PerronVector,
};
use crate::metric::{metric_matrix, residual_with_metric, MetricMatrix};
use crate::potential::{
    builtin_entropy, builtin_gibbs, builtin_quadratic, group_disagreement, AdditiveLyapunov,
    ConvexPotential,
};

/// Fixed tolerances, before the [`Mode`] scale is applied.
pub mod tol {
    pub const GRADIENT_FLOW: f64 = 1e-10;
    pub const STOCHASTIC: f64 = 1e-12;
    pub const SEMIGROUP: f64 = 1e-10;
    /// Relative to `max(1, |q . x(0)|)`.
    pub const CONSERVATION: f64 = 1e-8;
    pub const MONOTONE_MARGIN: f64 = 0.0;
    /// Monotonicity is only required while `||x - a 1||_inf` exceeds this.
    pub const CONSENSUS_BAND: f64 = 1e-6;
    /// Coefficient of `dt^2` in the dissipation tolerance.
    pub const DISSIPATION_DT2: f64 = 10.0;
    pub const DISSIPATION_FLOOR: f64 = 1e-9;
}

/// Global tolerance scale: strict is 0.1x, lenient 10x.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strict,
    #[default]
    Normal,
    Lenient,
}

impl Mode {
    pub fn scale(self) -> f64 {
        match self {
            Mode::Strict => 0.1,
            Mode::Normal => 1.0,
            Mode::Lenient => 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub seed: Option<u64>,
    pub context: String,
}

impl CheckReport {
    /// `passed` is `residual <= tolerance`.
    pub fn new(
        name: impl Into<String>,
        residual: f64,
        tolerance: f64,
        context: impl Into<String>,
    ) -> Self {
        CheckReport {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            seed: None,
            context: context.into(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_context(mut self, extra: &str) -> Self {
        if self.context.is_empty() {
            self.context = extra.to_string();
        } else {
            self.context = format!("{extra} {}", self.context);
        }
        self
    }

    /// One line: name, PASS/FAIL, residual, tolerance, seed, context.
    pub fn to_line(&self) -> String {
        let seed = self.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        format!(
            "{} {} residual={:e} tolerance={:e} seed={} context=\"{}\"",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.residual,
            self.tolerance,
            seed,
            self.context
        )
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

fn require_len(traj: &Trajectory, required: usize) -> Result<()> {
    if traj.len() < required {
        Err(Error::TrajectoryTooShort {
            len: traj.len(),
            required,
        })
    } else {
        Ok(())
    }
}

/// Gradient-flow identity `L x = G^{-1}(x) grad V(x)` at one state.
pub fn check_gradient_flow(
    l: &LaplacianMatrix,
    h: &ConvexPotential,
    x: &DVector<f64>,
    alpha: f64,
    mode: Mode,
) -> Result<CheckReport> {
    let g = metric_matrix(l, h, x, alpha)?;
    check_gradient_flow_with_metric(l, h, x, &g, mode)
}

/// As [`check_gradient_flow`] against a supplied (possibly corrupted) metric.
pub fn check_gradient_flow_with_metric(
    l: &LaplacianMatrix,
    h: &ConvexPotential,
    x: &DVector<f64>,
    g: &MetricMatrix,
    mode: Mode,
) -> Result<CheckReport> {
    let r = residual_with_metric(l, h, x, g)?;
    Ok(CheckReport::new(
        "gradient_flow",
        r,
        tol::GRADIENT_FLOW * mode.scale(),
        format!("n={} potential={} alpha={}", l.n(), h.name(), g.alpha()),
    ))
}

/// `dV/dt + Psi_V(x)` along a linear trajectory of a symmetric system.
///
/// `dV/dt` is the fourth-order centered difference
/// `(V_{k-2} - 8 V_{k-1} + 8 V_{k+1} - V_{k+2}) / (12 dt)` over the
/// uniformly spaced prefix of the samples; trajectories with only three or
/// four uniform samples fall back to the second-order stencil. The
/// tolerance is `max(10 dt^2, 1e-9)`.
pub fn check_dissipation(
    l: &LaplacianMatrix,
    v: &AdditiveLyapunov,
    traj: &Trajectory,
    mode: Mode,
) -> Result<CheckReport> {
    if !l.is_symmetric() {
        return Err(Error::NotSymmetric("check_dissipation"));
    }
    require_len(traj, 3)?;
    let t = traj.times();
    let dt = t[1] - t[0];
    let uniform = 1 + t
        .windows(2)
        .take_while(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt)
        .count();
    if uniform < 3 {
        return Err(Error::TrajectoryTooShort {
            len: uniform,
            required: 3,
        });
    }
    let values: Vec<f64> = traj.states()[..uniform]
        .iter()
        .map(|x| v.value(x))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    let interior: Box<dyn Iterator<Item = usize>> = if uniform >= 5 {
        Box::new(2..uniform - 2)
    } else {
        Box::new(1..uniform - 1)
    };
    for k in interior {
        let rate = if uniform >= 5 {
            (values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2])
                / (12.0 * dt)
        } else {
            (values[k + 1] - values[k - 1]) / (2.0 * dt)
        };
        let psi = group_disagreement(l, v, &traj.states()[k])?;
        worst = worst.max((rate + psi).abs());
    }
    let tolerance = (tol::DISSIPATION_DT2 * dt * dt).max(tol::DISSIPATION_FLOOR) * mode.scale();
    Ok(CheckReport::new(
        "dissipation",
        worst,
        tolerance,
        format!("n={} potential={} dt={dt}", l.n(), v.potential().name()),
    ))
}

/// `beta sum_i q_i H(c x_i)` for an arbitrary scalar `H`.
pub fn additive_functional(
    beta: f64,
    c: f64,
    q: &PerronVector,
    h: impl Fn(f64) -> f64,
    x: &DVector<f64>,
) -> f64 {
    beta * x
        .iter()
        .enumerate()
        .map(|(i, &xi)| q.get(i) * h(c * xi))
        .sum::<f64>()
}

/// Concave probe: with `H(u) = -u^2` the additive functional must increase
/// somewhere along the trajectory from `x0`. Passes when an increase is
/// found; a consensus initial state is reported as degenerate and fails.
pub fn check_convexity_necessity(
    l: &LaplacianMatrix,
    x0: &DVector<f64>,
    mode: Mode,
) -> Result<CheckReport> {
    let _ = mode;
    let q = perron_vector(l)?;
    let a = q.as_vector().dot(x0);
    let spread = x0.iter().map(|v| (v - a).abs()).fold(0.0, f64::max);
    let ctx = format!("n={} probe=-u^2", l.n());
    if spread <= 1e-12 * x0.amax().max(1.0) {
        return Ok(CheckReport::new(
            "convexity_necessity",
            1.0,
            0.0,
            format!("{ctx} degenerate: initial state is a consensus vector"),
        ));
    }
    let dt = (1e-2f64).min(stability_bound(l));
    let traj = integrate_linear(l, x0, 2.0, dt)?;
    let w: Vec<f64> = traj
        .states()
        .iter()
        .map(|x| additive_functional(1.0, 1.0, &q, |u| -u * u, x))
        .collect();
    let increase = w.windows(2).any(|p| p[1] > p[0]);
    Ok(CheckReport::new(
        "convexity_necessity",
        if increase { 0.0 } else { 1.0 },
        0.0,
        ctx,
    ))
}

/// Row sums one and entries non-negative for `exp(-L t)` on a grid of
/// horizons.
pub fn check_stochastic_flow(
    l: &LaplacianMatrix,
    t_grid: &[f64],
    mode: Mode,
) -> Result<CheckReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let p = flow_map(l, t)?;
        worst = worst.max(p.row_sum_residual()).max(-p.min_entry());
    }
    Ok(CheckReport::new(
        "stochastic_flow",
        worst,
        tol::STOCHASTIC * mode.scale(),
        format!("n={} t={t_grid:?}", l.n()),
    ))
}

/// `||P(s) P(t) - P(s + t)||_inf`.
pub fn check_semigroup(l: &LaplacianMatrix, s: f64, t: f64, mode: Mode) -> Result<CheckReport> {
    let lhs = flow_map(l, s)?.matrix() * flow_map(l, t)?.matrix();
    let rhs = flow_map(l, s + t)?;
    let r = (lhs - rhs.matrix())
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(CheckReport::new(
        "semigroup",
        r,
        tol::SEMIGROUP * mode.scale(),
        format!("n={} s={s} t={t}", l.n()),
    ))
}

/// `max_k |q . x(t_k) - q . x(0)|`.
pub fn check_conservation(traj: &Trajectory, q: &DVector<f64>, mode: Mode) -> Result<CheckReport> {
    require_len(traj, 2)?;
    crate::error::check_len(traj.dim(), q.len())?;
    let c0 = q.dot(traj.initial_state());
    let worst = traj
        .states()
        .iter()
        .map(|x| (q.dot(x) - c0).abs())
        .fold(0.0, f64::max);
    Ok(CheckReport::new(
        "conservation",
        worst,
        tol::CONSERVATION * c0.abs().max(1.0) * mode.scale(),
        format!("n={} samples={}", traj.dim(), traj.len()),
    ))
}

/// Strict decrease of `V` between consecutive samples, required while the
/// earlier sample is farther than [`tol::CONSENSUS_BAND`] from consensus.
///
/// The residual is the largest step `V_{k+1} - V_k` when non-negative (an
/// exactly flat step is reported as `f64::MIN_POSITIVE`), else zero.
pub fn check_monotone(v: &AdditiveLyapunov, traj: &Trajectory, mode: Mode) -> Result<CheckReport> {
    require_len(traj, 2)?;
    let mut worst = f64::NEG_INFINITY;
    let mut prev = v.value(traj.initial_state())?;
    let mut scanned = 0;
    for k in 0..traj.len() - 1 {
        if traj.distance_to_consensus(k) <= tol::CONSENSUS_BAND {
            break;
        }
        let next = v.value(&traj.states()[k + 1])?;
        worst = worst.max(next - prev);
        prev = next;
        scanned += 1;
    }
    let residual = if worst > 0.0 {
        worst
    } else if worst == 0.0 {
        f64::MIN_POSITIVE
    } else {
        0.0
    };
    Ok(CheckReport::new(
        "monotone",
        residual,
        tol::MONOTONE_MARGIN * mode.scale(),
        format!(
            "n={} potential={} segments={scanned}",
            traj.dim(),
            v.potential().name()
        ),
    ))
}

/// One random system of the verification suite.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub laplacian: LaplacianMatrix,
    pub state: DVector<f64>,
}

/// Deterministic sub-seed for instance `index` of size `n`.
pub fn instance_seed(base: u64, n: usize, index: usize) -> u64 {
    // splitmix64 finalizer over the packed triple
    let mut z = base
        .wrapping_add((n as u64) << 32)
        .wrapping_add(index as u64)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Erdős–Rényi graph with `p = 2 ln n / n` rejection-sampled for strong
/// connectivity, weights uniform in `[0.5, 2]`, and a state uniform in
/// `[0.5, 2]^n`.
pub fn random_instance(seed: u64, n: usize, symmetric: bool) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_strongly_connected(n, symmetric, &mut rng)?;
    let state = DVector::from_fn(n, |_, _| rng.random_range(0.5..=2.0));
    Ok(Instance {
        seed,
        laplacian: build_laplacian(&g),
        state,
    })
}

/// The three builtins, quadratic centred at one.
pub fn builtin_potentials() -> [ConvexPotential; 3] {
    [builtin_quadratic(1.0), builtin_entropy(), builtin_gibbs()]
}

/// All checks for one symmetric instance.
pub fn check_instance(inst: &Instance, mode: Mode) -> Result<Vec<CheckReport>> {
    let l = &inst.laplacian;
    let x = &inst.state;
    let n = l.n();
    let alpha = x.mean();
    let seed = inst.seed;
    let mut out = Vec::new();

    for h in builtin_potentials() {
        out.push(
            check_gradient_flow(l, &h, x, alpha, mode)?.with_context(&format!("[{}]", h.name())),
        );
    }
    // negative control: a 1e-3 error in one metric entry must be detected
    let g = metric_matrix(l, &builtin_gibbs(), x, alpha)?;
    let (i, j, _) = l.edges()[0];
    let corrupted =
        check_gradient_flow_with_metric(l, &builtin_gibbs(), x, &g.perturbed(i, j, 1e-3), mode)?;
    out.push(CheckReport::new(
        "gradient_flow_negative_control",
        if corrupted.passed { 1.0 } else { 0.0 },
        0.0,
        format!(
            "n={n} corrupted=({i},{j}) detected_residual={:e}",
            corrupted.residual
        ),
    ));

    out.push(check_stochastic_flow(l, &[0.01, 0.1, 1.0, 10.0], mode)?);
    out.push(check_semigroup(l, 0.3, 0.7, mode)?);

    let q = perron_vector(l)?;
    let dt = 1e-3f64.min(stability_bound(l));
    let traj = integrate_linear(l, x, 10.0, dt)?;
    out.push(check_conservation(&traj, q.as_vector(), mode)?.with_context("[linear]"));

    let a = q.as_vector().dot(x);
    let coarse = traj.subsample(100);
    for h in builtin_potentials() {
        let name = h.name().to_string();
        let v = AdditiveLyapunov::new(1.0, 1.0 / a, q.clone(), h)?;
        out.push(check_monotone(&v, &coarse, mode)?.with_context(&format!("[{name}]")));
    }

    let sos = AdditiveLyapunov::sum_of_squares(a, n)?;
    out.push(check_dissipation(l, &sos, &traj, mode)?.with_context("[sos]"));
    let gibbs = AdditiveLyapunov::gradient_flow_normalized(builtin_gibbs(), a, n)?;
    out.push(check_dissipation(l, &gibbs, &traj, mode)?.with_context("[gibbs]"));

    out.push(check_convexity_necessity(l, x, mode)?);

    let spec = NonlinearSpec::log_laplacian(a)?;
    let nl = integrate_nonlinear(l, &spec, x, 10.0, 1e-2)?;
    out.push(
        check_conservation(&nl, &PerronVector::uniform(n).as_vector().clone(), mode)?
            .with_context("[log-laplacian]"),
    );
    out.push(check_monotone(&gibbs, &nl, mode)?.with_context("[log-laplacian gibbs]"));

    Ok(out.into_iter().map(|r| r.with_seed(seed)).collect())
}

/// Runs [`check_instance`] on `count` random symmetric instances of each
/// size. Instances are independent and evaluated concurrently; the output
/// order is deterministic.
pub fn run_verification_suite(
    seed: u64,
    count: usize,
    sizes: &[usize],
    mode: Mode,
) -> Result<Vec<CheckReport>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("sizes must be non-empty".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidArgument(format!("graph size {n} is below 2")));
    }
    let jobs: Vec<(usize, usize)> = sizes
        .iter()
        .flat_map(|&n| (0..count).map(move |k| (n, k)))
        .collect();
    let results: Vec<Result<Vec<CheckReport>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(n, k)| {
                scope.spawn(move || {
                    let inst = random_instance(instance_seed(seed, n, k), n, true)?;
                    check_instance(&inst, mode)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check thread panicked"))
            .collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
