//! Consensus dynamics: the flow map `exp(-L t)`, fixed-step RK4 integration
//! of `x' = -L x`, the dual Kolmogorov equation `p' = -L^T p`, and the
//! state-dependent diffusions `x' = -L_hf(x) x`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::graph::{perron_vector, LaplacianMatrix, PerronVector};
use crate::scalar::{divided_difference, ScalarFn};

/// Taylor terms used by [`expm_neg`].
const TAYLOR_TERMS: usize = 20;
/// Smallest admissible sub-step of the nonlinear integrator.
pub const MIN_STEP: f64 = 1e-9;
/// Integration stops once `||x'||_inf <= EARLY_STOP_RATIO * ||x||_inf`.
pub const EARLY_STOP_RATIO: f64 = 1e-12;

/// `exp(-A t)` by scaling and squaring of a truncated Taylor series: scale
/// until `||A t||_inf / 2^k <= 1/2`, sum 20 terms, square `k` times.
pub fn expm_neg(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let b = a * (-t);
    let norm = b
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut k = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > 0.5 {
        scaled_norm *= 0.5;
        k += 1;
    }
    let b = b * 0.5f64.powi(k as i32);
    let id = DMatrix::<f64>::identity(n, n);
    // Horner: I + B(I + B/2(I + B/3(...)))
    let mut acc = id.clone();
    for m in (1..=TAYLOR_TERMS).rev() {
        acc = &id + (&b * acc) / m as f64;
    }
    for _ in 0..k {
        acc = &acc * &acc;
    }
    acc
}

/// `P(t) = exp(-L t)`, a row-stochastic matrix for `t >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    matrix: DMatrix<f64>,
    horizon: f64,
}

impl FlowMap {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `max_i |sum_j P_ij - 1|`.
    pub fn row_sum_residual(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.matrix.min()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.matrix.ncols(), x.len())?;
        Ok(&self.matrix * x)
    }
}

pub fn flow_map(l: &LaplacianMatrix, t: f64) -> Result<FlowMap> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "flow map horizon must be >= 0, got {t}"
        )));
    }
    Ok(FlowMap {
        matrix: expm_neg(l.entries(), t),
        horizon: t,
    })
}

/// Sampled solution of one of the consensus equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    weights: DVector<f64>,
    conserved: f64,
    stopped_early: Option<f64>,
}

impl Trajectory {
    /// Assembles a trajectory from samples. `weights` defines the conserved
    /// linear functional `weights . x`.
    pub fn from_samples(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        weights: DVector<f64>,
    ) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "sample times must increase strictly".into(),
            ));
        }
        for s in &states {
            check_len(weights.len(), s.len())?;
        }
        let conserved = weights.dot(&states[0]);
        Ok(Trajectory {
            times,
            states,
            weights,
            conserved,
            stopped_early: None,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.states[0]
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `weights . x(0)`: the consensus value for linear and symmetric
    /// nonlinear runs, the total mass for the Markov dual.
    pub fn conserved(&self) -> f64 {
        self.conserved
    }

    /// Time at which integration stopped because the state had equilibrated.
    pub fn stopped_early(&self) -> Option<f64> {
        self.stopped_early
    }

    /// Keeps every `stride`-th sample (and always the last one).
    pub fn subsample(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let last = self.len() - 1;
        let idx: Vec<usize> = (0..self.len())
            .filter(|&k| k % stride == 0 || k == last)
            .collect();
        Trajectory {
            times: idx.iter().map(|&k| self.times[k]).collect(),
            states: idx.iter().map(|&k| self.states[k].clone()).collect(),
            weights: self.weights.clone(),
            conserved: self.conserved,
            stopped_early: self.stopped_early,
        }
    }

    /// Keeps the first `len` samples.
    pub fn truncated(&self, len: usize) -> Trajectory {
        let len = len.clamp(1, self.len());
        Trajectory {
            times: self.times[..len].to_vec(),
            states: self.states[..len].to_vec(),
            weights: self.weights.clone(),
            conserved: self.conserved,
            stopped_early: None,
        }
    }

    /// `||x - a 1||_inf` with `a` the conserved weighted average.
    pub fn distance_to_consensus(&self, k: usize) -> f64 {
        let a = self.conserved / self.weights.sum();
        self.states[k]
            .iter()
            .map(|v| (v - a).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,x0,...,x{n-1}`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for i in 0..self.dim() {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{}", fmt_f64(*t));
            for v in x.iter() {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Knobs of the fixed-step integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub early_stop: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions { early_stop: true }
    }
}

/// `dt <= 1 / (2 max_i L_ii)`.
pub fn stability_bound(l: &LaplacianMatrix) -> f64 {
    let d = l.max_degree();
    if d > 0.0 {
        0.5 / d
    } else {
        f64::INFINITY
    }
}

fn validate_horizon(t_end: f64, dt: f64) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    Ok(())
}

fn sample_times(t_end: f64, dt: f64) -> Vec<f64> {
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
    times.push(t_end);
    times
}

fn rk4_step<F>(field: &F, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = field(x)?;
    let k2 = field(&(x + &k1 * (0.5 * h)))?;
    let k3 = field(&(x + &k2 * (0.5 * h)))?;
    let k4 = field(&(x + &k3 * h))?;
    Ok(x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

fn equilibrated(rate: &DVector<f64>, x: &DVector<f64>) -> bool {
    let r = rate.amax();
    r == 0.0 || r <= EARLY_STOP_RATIO * x.amax()
}

fn integrate_fixed<F>(
    field: F,
    x0: &DVector<f64>,
    weights: DVector<f64>,
    t_end: f64,
    dt: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let grid = sample_times(t_end, dt);
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    let mut x = x0.clone();
    let mut stopped = None;
    times.push(0.0);
    states.push(x.clone());
    for w in grid.windows(2) {
        if opts.early_stop && equilibrated(&field(&x)?, &x) {
            stopped = Some(w[0]);
            break;
        }
        x = rk4_step(&field, &x, w[1] - w[0])?;
        times.push(w[1]);
        states.push(x.clone());
    }
    let mut traj = Trajectory::from_samples(times, states, weights)?;
    traj.stopped_early = stopped;
    Ok(traj)
}

/// `(-L x)_i = sum_j w_ij (x_j - x_i)` evaluated edgewise, exact at
/// consensus.
fn linear_field(edges: &[(usize, usize, f64)], x: &DVector<f64>) -> DVector<f64> {
    let mut dx = DVector::zeros(x.len());
    for &(i, j, w) in edges {
        dx[i] += w * (x[j] - x[i]);
    }
    dx
}

/// Classical RK4 integration of `x' = -L x`, sampled every `dt`.
pub fn integrate_linear(
    l: &LaplacianMatrix,
    x0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_linear_with(l, x0, t_end, dt, &IntegrationOptions::default())
}

pub fn integrate_linear_with(
    l: &LaplacianMatrix,
    x0: &DVector<f64>,
    t_end: f64,
    dt: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    check_len(l.n(), x0.len())?;
    validate_horizon(t_end, dt)?;
    let bound = stability_bound(l);
    if dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let q = perron_vector(l)?;
    let edges = l.edges();
    integrate_fixed(
        |x| Ok(linear_field(&edges, x)),
        x0,
        q.as_vector().clone(),
        t_end,
        dt,
        opts,
    )
}

/// RK4 integration of the forward Kolmogorov equation `p' = -L^T p`.
pub fn markov_dual(
    l: &LaplacianMatrix,
    p0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    markov_dual_with(l, p0, t_end, dt, &IntegrationOptions::default())
}

pub fn markov_dual_with(
    l: &LaplacianMatrix,
    p0: &DVector<f64>,
    t_end: f64,
    dt: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    check_len(l.n(), p0.len())?;
    validate_horizon(t_end, dt)?;
    let (sum, min) = (p0.sum(), p0.min());
    if !(min > 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized {
            what: "p0",
            sum,
            min,
        });
    }
    let bound = stability_bound(l);
    if dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let edges = l.edges();
    let field = |p: &DVector<f64>| {
        let mut dp = DVector::zeros(p.len());
        for &(i, j, w) in &edges {
            let flux = w * p[i];
            dp[j] += flux;
            dp[i] -= flux;
        }
        Ok(dp)
    };
    integrate_fixed(
        field,
        p0,
        DVector::from_element(l.n(), 1.0),
        t_end,
        dt,
        opts,
    )
}

/// Pair of increasing functions and the density scale of the diffusion
/// `x' = -L_hf(x) x`.
#[derive(Debug, Clone)]
pub struct NonlinearSpec {
    pub f: ScalarFn,
    pub h: ScalarFn,
    pub alpha: f64,
}

impl NonlinearSpec {
    pub fn new(f: ScalarFn, h: ScalarFn, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(NonlinearSpec { f, h, alpha })
    }

    /// `x' = -L grad V_Gibbs(x) = -L ln(x / alpha)`: `h = ln` and
    /// `f(rho) = alpha rho`, so that `-[L_log]_ij = w_ij (ln rho_i - ln
    /// rho_j) / (alpha (rho_i - rho_j))`.
    pub fn log_laplacian(alpha: f64) -> Result<Self> {
        Self::new(
            ScalarFn::Affine {
                slope: alpha,
                offset: 0.0,
            },
            ScalarFn::log(),
            alpha,
        )
    }
}

/// Edge coefficient `(h(rho_i) - h(rho_j)) / (f(rho_i) - f(rho_j))`, with
/// limit `h'/f'` for coincident arguments.
fn edge_ratio(spec: &NonlinearSpec, ri: f64, rj: f64) -> Result<f64> {
    Ok(divided_difference(&spec.f, ri, rj)? / divided_difference(&spec.h, ri, rj)?)
}

/// `L_hf(x)`: off-diagonal `-w_ij (h(rho_i) - h(rho_j)) / (f(rho_i) -
/// f(rho_j))` with `rho = x / alpha`, rows summing to zero.
pub fn nonlinear_laplacian(
    l: &LaplacianMatrix,
    spec: &NonlinearSpec,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_len(l.n(), x.len())?;
    let rho = x / spec.alpha;
    let n = l.n();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, w) in l.edges() {
        let c = w * edge_ratio(spec, rho[i], rho[j])?;
        m[(i, j)] = -c;
        m[(i, i)] += c;
    }
    Ok(m)
}

fn nonlinear_field(
    edges: &[(usize, usize, f64)],
    spec: &NonlinearSpec,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let rho = x / spec.alpha;
    let mut dx = DVector::zeros(x.len());
    let mut diag = vec![0.0; x.len()];
    for &(i, j, w) in edges {
        let c = w * edge_ratio(spec, rho[i], rho[j])?;
        dx[i] += c * (x[j] - x[i]);
        diag[i] += c;
    }
    Ok((dx, diag.into_iter().fold(0.0, f64::max)))
}

/// RK4 integration of `x' = -L_hf(x) x`, sampled every `dt`. Each sample
/// interval is covered by sub-steps no larger than `1 / (2 max diag
/// L_hf(x))`; a sub-step whose stages leave the domain is halved, down to
/// [`MIN_STEP`].
pub fn integrate_nonlinear(
    l: &LaplacianMatrix,
    spec: &NonlinearSpec,
    x0: &DVector<f64>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_nonlinear_with(l, spec, x0, t_end, dt, &IntegrationOptions::default())
}

pub fn integrate_nonlinear_with(
    l: &LaplacianMatrix,
    spec: &NonlinearSpec,
    x0: &DVector<f64>,
    t_end: f64,
    dt: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    check_len(l.n(), x0.len())?;
    validate_horizon(t_end, dt)?;
    if let Some(index) = x0.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain {
            index,
            value: x0[index],
            potential: format!("nonlinear diffusion ({}, {})", spec.f.name(), spec.h.name()),
        });
    }
    // validates the domain at x0 before any stepping
    nonlinear_field(&l.edges(), spec, x0)?;
    let weights = if l.is_balanced() {
        PerronVector::uniform(l.n()).as_vector().clone()
    } else {
        perron_vector(l)?.as_vector().clone()
    };
    let edges = l.edges();
    let grid = sample_times(t_end, dt);
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut x = x0.clone();
    let mut stopped = None;
    let field = |y: &DVector<f64>| -> Result<DVector<f64>> {
        if y.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("left the positive orthant".into()));
        }
        Ok(nonlinear_field(&edges, spec, y)?.0)
    };
    for w in grid.windows(2) {
        let (rate, _) = nonlinear_field(&edges, spec, &x)?;
        if opts.early_stop && equilibrated(&rate, &x) {
            stopped = Some(w[0]);
            break;
        }
        let mut t = w[0];
        let mut h_try = f64::INFINITY;
        while t < w[1] {
            let (_, max_diag) = nonlinear_field(&edges, spec, &x)?;
            let bound = if max_diag > 0.0 {
                0.5 / max_diag
            } else {
                f64::INFINITY
            };
            let mut h = (w[1] - t).min(bound).min(h_try);
            loop {
                match rk4_step(&field, &x, h) {
                    Ok(next) if next.iter().all(|&v| v > 0.0) => {
                        x = next;
                        t = if h >= w[1] - t { w[1] } else { t + h };
                        break;
                    }
                    _ => {
                        h *= 0.5;
                        h_try = h;
                        if h < MIN_STEP {
                            return Err(Error::StepUnderflow {
                                t,
                                dt_min: MIN_STEP,
                            });
                        }
                    }
                }
            }
        }
        times.push(w[1]);
        states.push(x.clone());
    }
    let mut traj = Trajectory::from_samples(times, states, weights)?;
    traj.stopped_early = stopped;
    Ok(traj)
}

/// `a(x0) = q . x0`.
pub fn consensus_value(q: &PerronVector, x0: &DVector<f64>) -> Result<f64> {
    check_len(q.len(), x0.len())?;
    Ok(q.as_vector().dot(x0))
}

/// `rho = x / a`.
pub fn density(x: &DVector<f64>, a: f64) -> Result<DVector<f64>> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "density needs a positive consensus value, got {a}"
        )));
    }
    Ok(x / a)
}
