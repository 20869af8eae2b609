//! Convex scalar potentials, additive Lyapunov functionals
//! `V(x) = beta * sum_i q_i H(c x_i)`, f-divergences and the classical
//! disagreement measures.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::graph::{LaplacianMatrix, PerronVector};
use crate::scalar::{Interval, ScalarFn};

/// Arguments of the logarithmic potentials must be at least this large.
pub const LOG_DOMAIN_FLOOR: f64 = 1e-300;
/// Sample count used when certifying convexity of a custom potential.
pub const CONVEXITY_SAMPLES: usize = 1000;
/// Allowed deviation of `sum p_i` from one in [`f_divergence`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Quadratic {
        reference: f64,
    },
    Entropy,
    Gibbs,
    Custom {
        value: Func,
        derivative: Func,
        second: Func,
        domain: Interval,
    },
}

/// Strictly convex `H` bundled with `H'`, `H''` and its open domain.
#[derive(Clone)]
pub struct ConvexPotential {
    name: String,
    kind: Kind,
}

impl fmt::Debug for ConvexPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexPotential")
            .field("name", &self.name)
            .finish()
    }
}

/// `H(u) = (u - ref)^2 / 2`.
pub fn builtin_quadratic(reference: f64) -> ConvexPotential {
    ConvexPotential {
        name: "quadratic".into(),
        kind: Kind::Quadratic { reference },
    }
}

/// `H(u) = u ln u` on `u > 0`.
pub fn builtin_entropy() -> ConvexPotential {
    ConvexPotential {
        name: "entropy".into(),
        kind: Kind::Entropy,
    }
}

/// `H(u) = u (ln u - 1) + 1` on `u > 0`, minimal at `u = 1`.
pub fn builtin_gibbs() -> ConvexPotential {
    ConvexPotential {
        name: "gibbs".into(),
        kind: Kind::Gibbs,
    }
}

// ln u, accurate near u = 1
fn ln_accurate(u: f64) -> f64 {
    let d = u - 1.0;
    if d.abs() < 0.5 {
        d.ln_1p()
    } else {
        u.ln()
    }
}

impl ConvexPotential {
    /// Looks up a builtin by its CLI name.
    pub fn by_name(name: &str, reference: f64) -> Result<Self> {
        match name {
            "quadratic" => Ok(builtin_quadratic(reference)),
            "entropy" => Ok(builtin_entropy()),
            "gibbs" => Ok(builtin_gibbs()),
            other => Err(Error::Config(format!(
                "unknown potential `{other}` (expected quadratic, entropy, or gibbs)"
            ))),
        }
    }

    /// User-supplied potential. Convexity is not checked here; call
    /// [`ConvexPotential::validate_convexity`] on the range of interest.
    pub fn custom(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second_derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain: Interval,
    ) -> Self {
        ConvexPotential {
            name: name.into(),
            kind: Kind::Custom {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
                second: Arc::new(second_derivative),
                domain,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Interval {
        match &self.kind {
            Kind::Quadratic { .. } => Interval::REAL_LINE,
            Kind::Entropy | Kind::Gibbs => Interval::POSITIVE,
            Kind::Custom { domain, .. } => *domain,
        }
    }

    pub fn in_domain(&self, u: f64) -> bool {
        match &self.kind {
            Kind::Quadratic { .. } => u.is_finite(),
            Kind::Entropy | Kind::Gibbs => u >= LOG_DOMAIN_FLOOR && u.is_finite(),
            Kind::Custom { domain, .. } => domain.contains(u),
        }
    }

    fn guard(&self, u: f64) -> Result<()> {
        if self.in_domain(u) {
            Ok(())
        } else {
            Err(Error::ScalarDomain {
                function: self.name.clone(),
                value: u,
            })
        }
    }

    pub fn value(&self, u: f64) -> Result<f64> {
        self.guard(u)?;
        Ok(match &self.kind {
            Kind::Quadratic { reference } => 0.5 * (u - reference) * (u - reference),
            Kind::Entropy => u * ln_accurate(u),
            // u ln u - (u - 1), which avoids cancelling two O(1) terms near 1
            Kind::Gibbs => u * ln_accurate(u) - (u - 1.0),
            Kind::Custom { value, .. } => value(u),
        })
    }

    pub fn derivative(&self, u: f64) -> Result<f64> {
        self.guard(u)?;
        Ok(match &self.kind {
            Kind::Quadratic { reference } => u - reference,
            Kind::Entropy => ln_accurate(u) + 1.0,
            Kind::Gibbs => ln_accurate(u),
            Kind::Custom { derivative, .. } => derivative(u),
        })
    }

    pub fn second_derivative(&self, u: f64) -> Result<f64> {
        self.guard(u)?;
        Ok(match &self.kind {
            Kind::Quadratic { .. } => 1.0,
            Kind::Entropy | Kind::Gibbs => 1.0 / u,
            Kind::Custom { second, .. } => second(u),
        })
    }

    /// `H'` as an increasing function, the input of the divided
    /// differences that build the metric.
    pub fn derivative_fn(&self) -> ScalarFn {
        match &self.kind {
            Kind::Quadratic { reference } => ScalarFn::Affine {
                slope: 1.0,
                offset: -reference,
            },
            Kind::Entropy => ScalarFn::Log { offset: 1.0 },
            Kind::Gibbs => ScalarFn::Log { offset: 0.0 },
            Kind::Custom {
                derivative,
                second,
                domain,
                ..
            } => {
                let (d, s) = (derivative.clone(), second.clone());
                ScalarFn::custom(
                    format!("{}'", self.name),
                    move |u| d(u),
                    move |u| s(u),
                    *domain,
                )
            }
        }
    }

    /// Samples `H''` at [`CONVEXITY_SAMPLES`] evenly spaced points of
    /// `[lo, hi]` and requires it positive, with `H'` strictly increasing
    /// between consecutive samples.
    pub fn validate_convexity(&self, lo: f64, hi: f64) -> Result<()> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
        }
        let mut prev: Option<f64> = None;
        for k in 0..CONVEXITY_SAMPLES {
            let u = lo + (hi - lo) * k as f64 / (CONVEXITY_SAMPLES - 1) as f64;
            let h2 = self.second_derivative(u)?;
            if !(h2 > 0.0) {
                return Err(Error::NotConvex {
                    potential: self.name.clone(),
                    at: u,
                    value: h2,
                });
            }
            let h1 = self.derivative(u)?;
            if let Some(p) = prev {
                if !(h1 > p) {
                    return Err(Error::NotConvex {
                        potential: self.name.clone(),
                        at: u,
                        value: h2,
                    });
                }
            }
            prev = Some(h1);
        }
        Ok(())
    }
}

/// `V(x) = beta * sum_i q_i H(c x_i)`.
#[derive(Debug, Clone)]
pub struct AdditiveLyapunov {
    beta: f64,
    c: f64,
    q: PerronVector,
    potential: ConvexPotential,
}

impl AdditiveLyapunov {
    pub fn new(beta: f64, c: f64, q: PerronVector, potential: ConvexPotential) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta and c must be positive, got beta = {beta}, c = {c}"
            )));
        }
        Ok(AdditiveLyapunov {
            beta,
            c,
            q,
            potential,
        })
    }

    /// Normalization of the gradient-flow construction for symmetric
    /// systems: `V(x) = alpha * sum_i H(x_i / alpha)`, i.e. `beta = alpha n`,
    /// uniform `q`, `c = 1 / alpha`. Then `dV/dx_i = H'(x_i / alpha)`.
    pub fn gradient_flow_normalized(
        potential: ConvexPotential,
        alpha: f64,
        n: usize,
    ) -> Result<Self> {
        Self::new(
            alpha * n as f64,
            1.0 / alpha,
            PerronVector::uniform(n),
            potential,
        )
    }

    /// `V_SoS(x) = (1/2) sum_i (x_i - a)^2` for a fixed consensus value `a`,
    /// written as an additive functional (`H` quadratic with `ref = a`).
    pub fn sum_of_squares(consensus: f64, n: usize) -> Result<Self> {
        Self::new(
            n as f64,
            1.0,
            PerronVector::uniform(n),
            builtin_quadratic(consensus),
        )
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn q(&self) -> &PerronVector {
        &self.q
    }

    pub fn potential(&self) -> &ConvexPotential {
        &self.potential
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    fn scaled(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n(), x.len())?;
        let u = x * self.c;
        for (index, &ui) in u.iter().enumerate() {
            if !self.potential.in_domain(ui) {
                return Err(Error::Domain {
                    index,
                    value: x[index],
                    potential: self.potential.name.clone(),
                });
            }
        }
        Ok(u)
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        let u = self.scaled(x)?;
        let mut sum = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            sum += self.q.get(i) * self.potential.value(ui)?;
        }
        Ok(self.beta * sum)
    }

    /// `dV/dx_i = beta q_i c H'(c x_i)`.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let u = self.scaled(x)?;
        let mut g = DVector::zeros(u.len());
        for (i, &ui) in u.iter().enumerate() {
            g[i] = self.beta * self.q.get(i) * self.c * self.potential.derivative(ui)?;
        }
        Ok(g)
    }
}

pub fn lyapunov_value(v: &AdditiveLyapunov, x: &DVector<f64>) -> Result<f64> {
    v.value(x)
}

pub fn lyapunov_gradient(v: &AdditiveLyapunov, x: &DVector<f64>) -> Result<DVector<f64>> {
    v.gradient(x)
}

fn require_probability(what: &'static str, p: &DVector<f64>) -> Result<()> {
    let sum = p.sum();
    let min = p.min();
    if !(min > 0.0) || (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized { what, sum, min });
    }
    Ok(())
}

/// `sum_i q_i H(p_i / q_i)`.
pub fn f_divergence(h: &ConvexPotential, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    check_len(p.len(), q.len())?;
    require_probability("p", p)?;
    require_probability("q", q)?;
    let mut sum = 0.0;
    for i in 0..p.len() {
        sum += q[i] * h.value(p[i] / q[i])?;
    }
    Ok(sum)
}

/// `V_L(x) = (1/2) x^T L x`.
pub fn laplacian_potential(l: &LaplacianMatrix, x: &DVector<f64>) -> Result<f64> {
    if !l.is_symmetric() {
        return Err(Error::NotSymmetric("laplacian_potential"));
    }
    Ok(0.5 * x.dot(&l.apply(x)?))
}

/// `(1/2) sum_{i<j} w_ij (x_i - x_j)^2`; agrees with
/// [`laplacian_potential`] (each undirected edge counted once).
pub fn laplacian_potential_edge_sum(l: &LaplacianMatrix, x: &DVector<f64>) -> Result<f64> {
    check_len(l.n(), x.len())?;
    let edges = l.undirected_edges()?;
    Ok(0.5
        * edges
            .iter()
            .map(|&(i, j, w)| w * (x[i] - x[j]).powi(2))
            .sum::<f64>())
}

/// `V_SoS(x) = (1/2) sum_i (x_i - q^T x)^2`.
pub fn sum_of_squares(q: &PerronVector, x: &DVector<f64>) -> Result<f64> {
    check_len(q.len(), x.len())?;
    let a = q.as_vector().dot(x);
    Ok(0.5 * x.iter().map(|&xi| (xi - a).powi(2)).sum::<f64>())
}

/// Generalized group disagreement `Psi_V(x) = grad V(x) . L x`, the
/// dissipation rate of `V` along `x' = -L x`.
pub fn group_disagreement(
    l: &LaplacianMatrix,
    v: &AdditiveLyapunov,
    x: &DVector<f64>,
) -> Result<f64> {
    if !l.is_symmetric() {
        return Err(Error::NotSymmetric("group_disagreement"));
    }
    Ok(v.gradient(x)?.dot(&l.apply(x)?))
}

/// `sum_{i<j} w_ij (x_i - x_j)(dV_i - dV_j)`; agrees with
/// [`group_disagreement`].
pub fn group_disagreement_edge_sum(
    l: &LaplacianMatrix,
    v: &AdditiveLyapunov,
    x: &DVector<f64>,
) -> Result<f64> {
    let g = v.gradient(x)?;
    let edges = l.undirected_edges()?;
    Ok(edges
        .iter()
        .map(|&(i, j, w)| w * (x[i] - x[j]) * (g[i] - g[j]))
        .sum())
}

/// The quadratic and generalized disagreement measures at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisagreementReport {
    pub laplacian_potential: f64,
    pub group_disagreement: f64,
    pub collective: f64,
    pub generalized: f64,
}

pub fn disagreement_report(
    l: &LaplacianMatrix,
    v: &AdditiveLyapunov,
    x: &DVector<f64>,
) -> Result<DisagreementReport> {
    let vl = laplacian_potential(l, x)?;
    Ok(DisagreementReport {
        laplacian_potential: vl,
        group_disagreement: 2.0 * vl,
        collective: sum_of_squares(&PerronVector::uniform(l.n()), x)?,
        generalized: group_disagreement(l, v, x)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, WeightedDigraph};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::E;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn quadratic_values() {
        let h = builtin_quadratic(0.0);
        assert_eq!(h.value(2.0).unwrap(), 2.0);
        assert_eq!(h.derivative(2.0).unwrap(), 2.0);
        assert_eq!(builtin_quadratic(1.0).value(1.0).unwrap(), 0.0);
        for u in [-5.0, 0.0, 3.3, 1e6] {
            assert_eq!(h.second_derivative(u).unwrap(), 1.0);
        }
    }

    #[test]
    fn entropy_values() {
        let h = builtin_entropy();
        assert_eq!(h.value(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(h.value(E).unwrap(), E, epsilon = 1e-15);
        assert_eq!(h.derivative(1.0).unwrap(), 1.0);
        assert!(h.value(0.0).is_err());
        assert!(h.value(-1.0).is_err());
        assert!(h.value(1e-301).is_err());
        assert!(h.value(1e-300).is_ok());
    }

    #[test]
    fn gibbs_values() {
        let h = builtin_gibbs();
        assert_eq!(h.value(1.0).unwrap(), 0.0);
        assert_eq!(h.derivative(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(h.value(E).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(h.second_derivative(2.0).unwrap(), 0.5);
        assert!(h.value(0.0).is_err());
        // near the minimum the value is O(d^2)
        let d: f64 = 1e-7;
        assert_relative_eq!(h.value(1.0 + d).unwrap(), d * d / 2.0, max_relative = 1e-6);
    }

    #[test]
    fn builtins_are_convex() {
        builtin_quadratic(0.3)
            .validate_convexity(-10.0, 10.0)
            .unwrap();
        builtin_entropy().validate_convexity(1e-3, 50.0).unwrap();
        builtin_gibbs().validate_convexity(1e-3, 50.0).unwrap();
    }

    #[test]
    fn custom_convexity_check() {
        let cosh =
            ConvexPotential::custom("cosh", f64::cosh, f64::sinh, f64::cosh, Interval::REAL_LINE);
        cosh.validate_convexity(-3.0, 3.0).unwrap();
        let concave = ConvexPotential::custom(
            "neg-square",
            |u| -u * u,
            |u| -2.0 * u,
            |_| -2.0,
            Interval::REAL_LINE,
        );
        assert!(matches!(
            concave.validate_convexity(-1.0, 1.0),
            Err(Error::NotConvex { .. })
        ));
    }

    #[test]
    fn lyapunov_examples() {
        // beta = 2 (n C with C = 1), q uniform, H quadratic with ref 1
        let v = AdditiveLyapunov::new(2.0, 1.0, PerronVector::uniform(2), builtin_quadratic(1.0))
            .unwrap();
        assert_eq!(v.value(&dv(&[2.0, 0.0])).unwrap(), 1.0);
        assert_eq!(
            sum_of_squares(&PerronVector::uniform(2), &dv(&[2.0, 0.0])).unwrap(),
            1.0
        );

        let v = AdditiveLyapunov::new(3.0, 1.0, PerronVector::uniform(3), builtin_gibbs()).unwrap();
        assert_eq!(v.value(&dv(&[1.0, 1.0, 1.0])).unwrap(), 0.0);

        let v = AdditiveLyapunov::new(1.0, 1.0, PerronVector::uniform(2), builtin_quadratic(0.0))
            .unwrap();
        assert_eq!(v.gradient(&dv(&[2.0, 4.0])).unwrap(), dv(&[1.0, 2.0]));
    }

    #[test]
    fn domain_error_names_index() {
        let v =
            AdditiveLyapunov::new(1.0, 1.0, PerronVector::uniform(3), builtin_entropy()).unwrap();
        match v.value(&dv(&[1.0, 0.0, 2.0])) {
            Err(Error::Domain { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            v.gradient(&dv(&[1.0, 2.0, -1.0])),
            Err(Error::Domain { index: 2, .. })
        ));
    }

    #[test]
    fn invalid_parameters() {
        let q = PerronVector::uniform(2);
        assert!(AdditiveLyapunov::new(0.0, 1.0, q.clone(), builtin_gibbs()).is_err());
        assert!(AdditiveLyapunov::new(1.0, -1.0, q, builtin_gibbs()).is_err());
    }

    #[test]
    fn normalized_gibbs_gradient_is_log_density() {
        let alpha = 1.7;
        let v = AdditiveLyapunov::gradient_flow_normalized(builtin_gibbs(), alpha, 3).unwrap();
        let x = dv(&[0.4, 1.9, 2.8]);
        let g = v.gradient(&x).unwrap();
        for i in 0..3 {
            assert_relative_eq!(g[i], (x[i] / alpha).ln(), max_relative = 1e-14);
        }
    }

    #[test]
    fn kl_divergence_example() {
        let h = builtin_entropy();
        let p = dv(&[0.75, 0.25]);
        let q = dv(&[0.5, 0.5]);
        // direct summation oracle
        let kl = 0.75 * (0.75f64 / 0.5).ln() + 0.25 * (0.25f64 / 0.5).ln();
        assert_abs_diff_eq!(f_divergence(&h, &p, &q).unwrap(), kl, epsilon = 1e-15);
        assert_abs_diff_eq!(kl, 0.130812, epsilon = 1e-6);
        assert_abs_diff_eq!(
            f_divergence(&builtin_gibbs(), &p, &q).unwrap(),
            kl,
            epsilon = 1e-15
        );
        assert_eq!(f_divergence(&h, &q, &q).unwrap(), 0.0);
        assert!(matches!(
            f_divergence(&h, &dv(&[0.7, 0.2]), &q),
            Err(Error::NotNormalized { what: "p", .. })
        ));
    }

    #[test]
    fn laplacian_potential_examples() {
        let l = build_laplacian(&WeightedDigraph::undirected(2, &[(0, 1, 1.0)]).unwrap());
        assert_eq!(laplacian_potential(&l, &dv(&[2.0, 0.0])).unwrap(), 2.0);
        assert_eq!(laplacian_potential(&l, &dv(&[3.0, 3.0])).unwrap(), 0.0);
        assert_eq!(
            laplacian_potential_edge_sum(&l, &dv(&[2.0, 0.0])).unwrap(),
            2.0
        );

        let directed = build_laplacian(
            &WeightedDigraph::new(
                2,
                vec![
                    crate::graph::Edge::new(0, 1, 1.0),
                    crate::graph::Edge::new(1, 0, 2.0),
                ],
            )
            .unwrap(),
        );
        assert!(matches!(
            laplacian_potential(&directed, &dv(&[1.0, 0.0])),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn group_disagreement_examples() {
        let l = build_laplacian(&WeightedDigraph::undirected(2, &[(0, 1, 1.0)]).unwrap());
        // beta = n, q uniform, c = 1, ref 0  =>  grad V = x
        let v = AdditiveLyapunov::new(2.0, 1.0, PerronVector::uniform(2), builtin_quadratic(0.0))
            .unwrap();
        assert_eq!(group_disagreement(&l, &v, &dv(&[2.0, 0.0])).unwrap(), 4.0);
        assert_eq!(group_disagreement(&l, &v, &dv(&[1.5, 1.5])).unwrap(), 0.0);
        let r = disagreement_report(&l, &v, &dv(&[2.0, 0.0])).unwrap();
        assert_eq!(
            r,
            DisagreementReport {
                laplacian_potential: 2.0,
                group_disagreement: 4.0,
                collective: 1.0,
                generalized: 4.0,
            }
        );
    }
}
