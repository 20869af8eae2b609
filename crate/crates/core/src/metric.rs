//! State-dependent Kirchhoff-form matrices and the inverse metric
//! `G^{-1}(x) = alpha K_{H'}(x / alpha)` under which `x' = -L x` is the
//! gradient flow of `V(x) = alpha sum_i H(x_i / alpha)`.
//!
//! Only `G^{-1}` is ever formed; it carries the sparsity of `L`, `G` does
//! not.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::graph::{IncidenceMatrix, LaplacianMatrix};
use crate::potential::{AdditiveLyapunov, ConvexPotential};
use crate::scalar::{divided_difference, ScalarFn};

pub use crate::scalar::log_mean;

/// Symmetric Laplacian-form matrix evaluated at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricMatrix {
    entries: DMatrix<f64>,
    state: DVector<f64>,
    alpha: f64,
}

impl MetricMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.entries.ncols(), v.len())?;
        Ok(&self.entries * v)
    }

    /// `v . G^{-1} v`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> Result<f64> {
        Ok(v.dot(&self.apply(v)?))
    }

    /// Overwrites one entry, leaving all invariants unchecked. Used to build
    /// negative controls.
    pub fn perturbed(&self, i: usize, j: usize, delta: f64) -> MetricMatrix {
        let mut m = self.clone();
        m.entries[(i, j)] += delta;
        m
    }

    /// Checks symmetry, zero row sums, sign pattern, sparsity pattern
    /// against `l`, and positive semi-definiteness with a one-dimensional
    /// kernel. Returns a list of violated properties (empty when valid).
    pub fn invariant_violations(&self, l: &LaplacianMatrix) -> Vec<String> {
        let m = &self.entries;
        let n = m.nrows();
        let scale = m.amax().max(1.0);
        let mut out = Vec::new();
        for i in 0..n {
            let row: f64 = m.row(i).sum();
            if row.abs() > 1e-12 * scale {
                out.push(format!("row {i} sums to {row}"));
            }
            for j in 0..n {
                if i == j {
                    continue;
                }
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    out.push(format!("asymmetric at ({i}, {j})"));
                }
                if m[(i, j)] > 0.0 {
                    out.push(format!("positive off-diagonal at ({i}, {j})"));
                }
                if (m[(i, j)] != 0.0) != (l.entries()[(i, j)] != 0.0) {
                    out.push(format!("sparsity differs from L at ({i}, {j})"));
                }
            }
        }
        let sym = 0.5 * (m + m.transpose());
        let eig = sym.symmetric_eigenvalues();
        let tol = 1e-10 * scale;
        if eig.iter().any(|&e| e < -tol) {
            out.push(format!(
                "not positive semi-definite (min eigenvalue {})",
                eig.min()
            ));
        }
        let kernel = eig.iter().filter(|&&e| e.abs() <= tol).count();
        if l.is_strongly_connected() && kernel != 1 {
            out.push(format!("kernel dimension {kernel}, expected 1"));
        }
        out
    }
}

/// `[K_f(y)]_ij = -w_ij K_f(y_i, y_j)` on edges, with the diagonal making
/// each row sum to zero.
pub fn kirchhoff_form_matrix(
    l: &LaplacianMatrix,
    f: &ScalarFn,
    y: &DVector<f64>,
) -> Result<MetricMatrix> {
    check_len(l.n(), y.len())?;
    let edges = l.undirected_edges()?;
    let n = l.n();
    let mut m = DMatrix::zeros(n, n);
    for (i, j, w) in edges {
        let k = w * divided_difference(f, y[i], y[j])?;
        m[(i, j)] = -k;
        m[(j, i)] = -k;
        m[(i, i)] += k;
        m[(j, j)] += k;
    }
    Ok(MetricMatrix {
        entries: m,
        state: y.clone(),
        alpha: 1.0,
    })
}

fn density(x: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(x / alpha)
}

fn guard_potential(h: &ConvexPotential, x: &DVector<f64>, rho: &DVector<f64>) -> Result<()> {
    for (index, &r) in rho.iter().enumerate() {
        if !h.in_domain(r) {
            return Err(Error::Domain {
                index,
                value: x[index],
                potential: h.name().to_string(),
            });
        }
    }
    Ok(())
}

/// `G^{-1}(x) = alpha K_{H'}(x / alpha)`.
pub fn metric_matrix(
    l: &LaplacianMatrix,
    h: &ConvexPotential,
    x: &DVector<f64>,
    alpha: f64,
) -> Result<MetricMatrix> {
    let rho = density(x, alpha)?;
    guard_potential(h, x, &rho)?;
    let k = kirchhoff_form_matrix(l, &h.derivative_fn(), &rho)?;
    Ok(MetricMatrix {
        entries: k.entries * alpha,
        state: x.clone(),
        alpha,
    })
}

/// `||-L x + G^{-1}(x) grad V(x)||_inf / max(1, ||L x||_inf)` for the
/// normalized functional `V(x) = alpha sum_i H(x_i / alpha)`.
pub fn gradient_identity_residual(
    l: &LaplacianMatrix,
    h: &ConvexPotential,
    x: &DVector<f64>,
    alpha: f64,
) -> Result<f64> {
    let g = metric_matrix(l, h, x, alpha)?;
    residual_with_metric(l, h, x, &g)
}

/// Same residual as [`gradient_identity_residual`] against a caller-supplied
/// metric.
pub fn residual_with_metric(
    l: &LaplacianMatrix,
    h: &ConvexPotential,
    x: &DVector<f64>,
    g: &MetricMatrix,
) -> Result<f64> {
    let v = AdditiveLyapunov::gradient_flow_normalized(h.clone(), g.alpha(), l.n())?;
    let lx = l.apply(x)?;
    let rhs = g.apply(&v.gradient(x)?)?;
    Ok((&rhs - &lx).amax() / lx.amax().max(1.0))
}

/// Positive edge conductances aligned with an incidence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeightMatrix {
    diagonal: DVector<f64>,
}

impl EdgeWeightMatrix {
    pub fn diagonal(&self) -> &DVector<f64> {
        &self.diagonal
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diagonal)
    }
}

/// Kirchhoff–Ohm factorization `G^{-1}(x) = M^T W(x) M` with
/// `W_e = alpha w_ij K_{H'}(rho_i, rho_j)` over the undirected edges.
pub fn factorize(
    l: &LaplacianMatrix,
    h: &ConvexPotential,
    x: &DVector<f64>,
    alpha: f64,
) -> Result<(IncidenceMatrix, EdgeWeightMatrix)> {
    check_len(l.n(), x.len())?;
    let rho = density(x, alpha)?;
    guard_potential(h, x, &rho)?;
    let f = h.derivative_fn();
    let edges = l.undirected_edges()?;
    let pairs: Vec<_> = edges.iter().map(|&(i, j, _)| (i, j)).collect();
    let mut w = DVector::zeros(edges.len());
    for (e, &(i, j, wij)) in edges.iter().enumerate() {
        w[e] = alpha * wij * divided_difference(&f, rho[i], rho[j])?;
    }
    Ok((
        IncidenceMatrix::from_pairs(l.n(), &pairs),
        EdgeWeightMatrix { diagonal: w },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, random_strongly_connected, Edge, WeightedDigraph};
    use crate::potential::{builtin_entropy, builtin_gibbs, builtin_quadratic};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_edge() -> LaplacianMatrix {
        build_laplacian(&WeightedDigraph::undirected(2, &[(0, 1, 1.0)]).unwrap())
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn random_system(seed: u64, n: usize) -> (LaplacianMatrix, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = build_laplacian(&random_strongly_connected(n, true, &mut rng).unwrap());
        let x = DVector::from_fn(n, |_, _| rng.random_range(0.2..3.0));
        (l, x)
    }

    #[test]
    fn identity_reproduces_laplacian() {
        let (l, y) = random_system(1, 6);
        let k = kirchhoff_form_matrix(&l, &ScalarFn::identity(), &y).unwrap();
        assert!((k.entries() - l.entries()).amax() <= 1e-15);
    }

    #[test]
    fn consensus_state_scales_laplacian() {
        let l = build_laplacian(
            &WeightedDigraph::undirected(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap(),
        );
        let y = DVector::from_element(3, 2.5);
        let k = kirchhoff_form_matrix(&l, &ScalarFn::log(), &y).unwrap();
        assert!((k.entries() - l.entries() * 2.5).amax() <= 1e-15);
    }

    #[test]
    fn kirchhoff_form_invariants_random() {
        for seed in 0..10 {
            let (l, y) = random_system(seed, 8);
            let k = kirchhoff_form_matrix(&l, &ScalarFn::log(), &y).unwrap();
            assert!(
                k.invariant_violations(&l).is_empty(),
                "{:?}",
                k.invariant_violations(&l)
            );
        }
    }

    #[test]
    fn non_symmetric_rejected() {
        let l = build_laplacian(
            &WeightedDigraph::new(2, vec![Edge::new(0, 1, 1.0), Edge::new(1, 0, 2.0)]).unwrap(),
        );
        assert!(matches!(
            kirchhoff_form_matrix(&l, &ScalarFn::log(), &dv(&[1.0, 2.0])),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn quadratic_metric_is_scaled_laplacian() {
        let (l, x) = random_system(2, 6);
        let g = metric_matrix(&l, &builtin_quadratic(0.8), &x, 1.3).unwrap();
        assert_eq!(g.entries(), &(l.entries() * 1.3));
    }

    #[test]
    fn gibbs_two_node_metric() {
        let g = metric_matrix(&unit_edge(), &builtin_gibbs(), &dv(&[1.5, 0.5]), 1.0).unwrap();
        assert_abs_diff_eq!(g.entries()[(0, 1)], -1.0 / 3f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.entries()[(0, 1)], -0.910239, epsilon = 1e-6);
        // (G^{-1} grad V)_0 = (1/ln 3) ln 3 = 1 = (L x)_0
        let v = AdditiveLyapunov::gradient_flow_normalized(builtin_gibbs(), 1.0, 2).unwrap();
        let flow = g.apply(&v.gradient(&dv(&[1.5, 0.5])).unwrap()).unwrap();
        assert_abs_diff_eq!(flow[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(flow[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn entropy_and_gibbs_metrics_agree() {
        let (l, x) = random_system(3, 8);
        let a = metric_matrix(&l, &builtin_entropy(), &x, 1.1).unwrap();
        let b = metric_matrix(&l, &builtin_gibbs(), &x, 1.1).unwrap();
        assert!((a.entries() - b.entries()).amax() <= 1e-12);
    }

    #[test]
    fn residual_vanishes() {
        for seed in 0..10 {
            let (l, x) = random_system(seed, 8);
            let alpha = x.mean();
            for h in [builtin_quadratic(0.0), builtin_entropy(), builtin_gibbs()] {
                let r = gradient_identity_residual(&l, &h, &x, alpha).unwrap();
                assert!(r <= 1e-10, "{} {r}", h.name());
            }
        }
        let x = DVector::from_element(2, 0.7);
        assert_eq!(
            gradient_identity_residual(&unit_edge(), &builtin_gibbs(), &x, 0.7).unwrap(),
            0.0
        );
    }

    #[test]
    fn perturbed_metric_breaks_identity() {
        let (l, x) = random_system(4, 6);
        let g = metric_matrix(&l, &builtin_gibbs(), &x, x.mean()).unwrap();
        let bad = g.perturbed(0, 1, 1e-3);
        assert!(residual_with_metric(&l, &builtin_gibbs(), &x, &bad).unwrap() > 1e-10);
    }

    #[test]
    fn factorization_examples() {
        let (l, x) = random_system(5, 7);
        let (m, w) = factorize(&l, &builtin_quadratic(0.0), &x, 2.0).unwrap();
        for (e, &(i, j)) in m.edges().iter().enumerate() {
            assert_eq!(w.diagonal()[e], 2.0 * l.weight(i, j));
        }

        let l1 = build_laplacian(&WeightedDigraph::undirected(2, &[(0, 1, 0.6)]).unwrap());
        let x1 = dv(&[1.2, 0.4]);
        let (_, w) = factorize(&l1, &builtin_gibbs(), &x1, 0.8).unwrap();
        let expected = 0.8 * 0.6 * divided_difference(&ScalarFn::log(), 1.5, 0.5).unwrap();
        assert_abs_diff_eq!(w.diagonal()[0], expected, epsilon = 1e-15);

        let g = metric_matrix(&l, &builtin_gibbs(), &x, 1.4).unwrap();
        let (m, w) = factorize(&l, &builtin_gibbs(), &x, 1.4).unwrap();
        let rebuilt = m.entries().transpose() * w.to_matrix() * m.entries();
        assert!((rebuilt - g.entries()).amax() <= 1e-12);
    }

    #[test]
    fn domain_error_from_metric() {
        let err = metric_matrix(&unit_edge(), &builtin_entropy(), &dv(&[1.0, 0.0]), 1.0);
        assert!(matches!(err, Err(Error::Domain { index: 1, .. })));
    }
}
