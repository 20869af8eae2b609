//! Weighted digraphs, their Laplacian and incidence matrices, connectivity,
//! and the Perron (stationary) vector.
//!
//! Sign convention: the Laplacian stores `-w_ij` off the diagonal for an
//! edge `i -> j` and the out-weight sum on the diagonal, so that
//! `(-L x)_i = sum_j w_ij (x_j - x_i)`. Every edge-sum formula elsewhere in
//! the crate iterates the positive weights `w_ij = -L_ij`.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_len, Error, Result};

/// Row sums of a Laplacian must vanish to this absolute tolerance.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Singular values below `RANK_REL_TOL * sigma_max` count as zero.
pub const RANK_REL_TOL: f64 = 1e-9;
/// Perron residual bound, relative to `||L||_inf`.
pub const PERRON_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(source: usize, target: usize, weight: f64) -> Self {
        Edge {
            source,
            target,
            weight,
        }
    }
}

/// Node count plus positively weighted directed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedDigraph {
    /// Validates positivity of weights, absence of self-loops, index range
    /// and uniqueness of each ordered pair. Duplicates are rejected rather
    /// than merged.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("node count must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) references a node outside [0, {n})",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(Error::InvalidGraph(format!(
                    "self-loop at node {}",
                    e.source
                )));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive or non-finite weight {}",
                    e.source, e.target, e.weight
                )));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.source, e.target
                )));
            }
        }
        Ok(WeightedDigraph { n, edges })
    }

    /// Builds a graph with both orientations of every listed pair.
    pub fn undirected(n: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .flat_map(|&(i, j, w)| [Edge::new(i, j, w), Edge::new(j, i, w)])
            .collect();
        Self::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weight(&self, source: usize, target: usize) -> Option<f64> {
        self.edges
            .iter()
            .find(|e| e.source == source && e.target == target)
            .map(|e| e.weight)
    }

    /// True when every edge `i -> j` has a reverse edge of identical weight.
    pub fn is_symmetric(&self) -> bool {
        self.edges
            .iter()
            .all(|e| self.weight(e.target, e.source) == Some(e.weight))
    }

    /// Unordered edges `{i, j}` with `i < j`, in order of first appearance.
    /// Only meaningful for symmetric graphs.
    pub fn undirected_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for e in &self.edges {
            let key = (e.source.min(e.target), e.source.max(e.target));
            if seen.insert(key) {
                out.push((key.0, key.1, e.weight));
            }
        }
        out
    }

    fn adjacency(&self, reverse: bool) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            if reverse {
                adj[e.target].push(e.source);
            } else {
                adj[e.source].push(e.target);
            }
        }
        adj
    }

    /// Parses the edge-list text format: a header `n <count>`, then one
    /// `i j w` line per directed edge. Lines starting with `#` and blank
    /// lines are skipped.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            if fields[0] == "n" {
                if n.is_some() {
                    return Err(parse_err("repeated `n` header".into()));
                }
                if fields.len() != 2 {
                    return Err(parse_err("expected `n <count>`".into()));
                }
                let count = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                n = Some(count);
                continue;
            }
            if n.is_none() {
                return Err(parse_err("edge before `n <count>` header".into()));
            }
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected `i j w`, found {} fields",
                    fields.len()
                )));
            }
            let i = fields[0]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad source index: {e}")))?;
            let j = fields[1]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad target index: {e}")))?;
            let w = fields[2]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad weight: {e}")))?;
            edges.push(Edge::new(i, j, w));
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            message: "missing `n <count>` header".into(),
        })?;
        Self::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {:?}", e.source, e.target, e.weight);
        }
        out
    }
}

/// Real `n x n` matrix with zero row sums and non-positive off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
    symmetric: bool,
    balanced: bool,
}

impl LaplacianMatrix {
    /// Wraps a dense matrix after checking the Laplacian invariants.
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "Laplacian must be a non-empty square matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let n = entries.nrows();
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) is not finite"
                    )));
                }
                if i == j && v < 0.0 {
                    return Err(Error::InvalidArgument(format!("negative diagonal at {i}")));
                }
                if i != j && v > 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "positive off-diagonal entry at ({i}, {j})"
                    )));
                }
                sum += v;
            }
            if sum.abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self::flagged(entries))
    }

    fn flagged(entries: DMatrix<f64>) -> Self {
        let n = entries.nrows();
        let symmetric = (0..n).all(|i| (0..i).all(|j| entries[(i, j)] == entries[(j, i)]));
        let scale = entries.amax().max(1.0);
        let balanced =
            symmetric || (0..n).all(|j| entries.column(j).sum().abs() <= ROW_SUM_TOL * scale);
        LaplacianMatrix {
            entries,
            symmetric,
            balanced,
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_balanced(&self) -> bool {
        self.balanced
    }

    /// Positive coupling `w_ij = -L_ij` (zero when there is no edge).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            -self.entries[(i, j)]
        }
    }

    /// Directed edges `(i, j, w_ij)` read off the off-diagonal pattern.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.entries[(i, j)] < 0.0 {
                    out.push((i, j, -self.entries[(i, j)]));
                }
            }
        }
        out
    }

    /// Unordered edges `(i, j, w)` with `i < j` of a symmetric Laplacian.
    pub fn undirected_edges(&self) -> Result<Vec<(usize, usize, f64)>> {
        if !self.symmetric {
            return Err(Error::NotSymmetric("undirected edge enumeration"));
        }
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.entries[(i, j)] < 0.0 {
                    out.push((i, j, -self.entries[(i, j)]));
                }
            }
        }
        Ok(out)
    }

    pub fn norm_inf(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_degree(&self) -> f64 {
        self.entries.diagonal().max()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n(), x.len())?;
        Ok(&self.entries * x)
    }

    /// Strong connectivity of the off-diagonal sparsity pattern.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.n();
        let mut fwd = vec![Vec::new(); n];
        let mut rev = vec![Vec::new(); n];
        for (i, j, _) in self.edges() {
            fwd[i].push(j);
            rev[j].push(i);
        }
        reaches_all(&fwd) && reaches_all(&rev)
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.entries)
    }
}

/// `L_ij = -w_ij` on edges, out-weight sums on the diagonal.
pub fn build_laplacian(g: &WeightedDigraph) -> LaplacianMatrix {
    let n = g.n();
    let mut m = DMatrix::zeros(n, n);
    for e in g.edges() {
        m[(e.source, e.target)] = -e.weight;
        m[(e.source, e.source)] += e.weight;
    }
    LaplacianMatrix::flagged(m)
}

/// Signed node-to-edge incidence matrix: row `e` for edge `(i, j)` holds
/// `+1` at column `i` and `-1` at column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    entries: DMatrix<f64>,
    edges: Vec<(usize, usize)>,
}

impl IncidenceMatrix {
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut entries = DMatrix::zeros(pairs.len(), n);
        for (row, &(i, j)) in pairs.iter().enumerate() {
            entries[(row, i)] = 1.0;
            entries[(row, j)] = -1.0;
        }
        IncidenceMatrix {
            entries,
            edges: pairs.to_vec(),
        }
    }

    /// One row per directed edge, in the graph's edge order.
    pub fn directed(g: &WeightedDigraph) -> Self {
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.source, e.target)).collect();
        Self::from_pairs(g.n(), &pairs)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `M^T diag(w) M`.
    pub fn weighted_gram(&self, weights: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(self.num_edges(), weights.len())?;
        let n = self.entries.ncols();
        let mut out = DMatrix::zeros(n, n);
        for (row, &(i, j)) in self.edges.iter().enumerate() {
            let w = weights[row];
            out[(i, i)] += w;
            out[(j, j)] += w;
            out[(i, j)] -= w;
            out[(j, i)] -= w;
        }
        Ok(out)
    }
}

/// Undirected incidence of a symmetric graph: each unordered edge once,
/// oriented from the smaller to the larger index.
pub fn incidence(g: &WeightedDigraph) -> Result<IncidenceMatrix> {
    if !g.is_symmetric() {
        return Err(Error::NotSymmetric("undirected incidence"));
    }
    let pairs: Vec<_> = g
        .undirected_edges()
        .iter()
        .map(|&(i, j, _)| (i, j))
        .collect();
    Ok(IncidenceMatrix::from_pairs(g.n(), &pairs))
}

/// Conductances aligned with the rows of [`incidence`].
pub fn undirected_weights(g: &WeightedDigraph) -> Result<DVector<f64>> {
    if !g.is_symmetric() {
        return Err(Error::NotSymmetric("undirected incidence"));
    }
    let w: Vec<f64> = g.undirected_edges().iter().map(|e| e.2).collect();
    Ok(DVector::from_vec(w))
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    count == n
}

/// Every node reaches every other node along directed edges.
pub fn is_strongly_connected(g: &WeightedDigraph) -> bool {
    reaches_all(&g.adjacency(false)) && reaches_all(&g.adjacency(true))
}

/// Rank from singular values, counting those below `1e-9 * sigma_max` as
/// zero.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_REL_TOL * max).count()
}

/// Positive left null vector of `L` with unit 1-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronVector {
    q: DVector<f64>,
}

impl PerronVector {
    /// `(1/n) 1`, the Perron vector of every balanced Laplacian.
    pub fn uniform(n: usize) -> Self {
        PerronVector {
            q: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    /// Accepts `q` if it is positive, sums to one and annihilates `L` from
    /// the left.
    pub fn new(q: DVector<f64>, l: &LaplacianMatrix) -> Result<Self> {
        check_len(l.n(), q.len())?;
        if q.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Reducible);
        }
        if (q.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "Perron vector must have unit 1-norm, got {}",
                q.sum()
            )));
        }
        let pv = PerronVector { q };
        if pv.residual(l) > PERRON_RESIDUAL_TOL * l.norm_inf().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument("q^T L does not vanish".into()));
        }
        Ok(pv)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.q[i]
    }

    /// `||q^T L||_inf`.
    pub fn residual(&self, l: &LaplacianMatrix) -> f64 {
        (l.entries().transpose() * &self.q).amax()
    }
}

/// Solves `q^T L = 0`, `sum q = 1` by dense LU with one equation replaced
/// by the normalization; falls back to power iteration on `exp(-L/||L||)`
/// when the direct solve is inaccurate.
pub fn perron_vector(l: &LaplacianMatrix) -> Result<PerronVector> {
    let n = l.n();
    if !l.is_strongly_connected() {
        return Err(Error::Reducible);
    }
    if l.is_balanced() {
        return Ok(PerronVector::uniform(n));
    }
    let tol = PERRON_RESIDUAL_TOL * l.norm_inf();
    if let Some(q) = direct_perron(l) {
        let pv = PerronVector { q };
        if pv.q.iter().all(|&v| v > 0.0) && pv.residual(l) <= tol {
            return Ok(pv);
        }
    }
    let q = power_perron(l);
    let pv = PerronVector { q };
    if pv.q.iter().all(|&v| v > 0.0) && pv.residual(l) <= tol {
        Ok(pv)
    } else {
        Err(Error::Reducible)
    }
}

fn direct_perron(l: &LaplacianMatrix) -> Option<DVector<f64>> {
    let n = l.n();
    let mut a = l.entries().transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let q = a.lu().solve(&b)?;
    let s = q.sum();
    Some(q / s)
}

fn power_perron(l: &LaplacianMatrix) -> DVector<f64> {
    let n = l.n();
    let step = crate::flow::expm_neg(l.entries(), 1.0 / l.norm_inf()).transpose();
    let mut q = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..100_000 {
        let mut next = &step * &q;
        next /= next.sum();
        let delta = (&next - &q).amax();
        q = next;
        if delta < 1e-16 {
            break;
        }
    }
    q
}

/// Smallest non-zero real part among the eigenvalues of `L` (the spectral
/// gap governing convergence to consensus).
pub fn algebraic_connectivity(l: &LaplacianMatrix) -> f64 {
    let n = l.n();
    if n < 2 {
        return 0.0;
    }
    let mut re: Vec<f64> = if l.is_symmetric() {
        l.entries()
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    } else {
        l.entries()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .collect()
    };
    re.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    re[1..].iter().copied().fold(f64::INFINITY, f64::min)
}

/// Erdős–Rényi digraph: each admissible pair is an edge with probability
/// `p`, weights uniform in `weights`. With `symmetric` the pair `{i, j}` is
/// drawn once and both orientations share a weight.
pub fn erdos_renyi<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    weights: (f64, f64),
    symmetric: bool,
    rng: &mut R,
) -> Result<WeightedDigraph> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || (symmetric && j < i) {
                continue;
            }
            if rng.random::<f64>() < p {
                let w = rng.random_range(weights.0..=weights.1);
                edges.push(Edge::new(i, j, w));
                if symmetric {
                    edges.push(Edge::new(j, i, w));
                }
            }
        }
    }
    WeightedDigraph::new(n, edges)
}

/// Rejection-samples [`erdos_renyi`] with `p = 2 ln n / n` and weights in
/// `[0.5, 2]` until the graph is strongly connected.
pub fn random_strongly_connected<R: Rng + ?Sized>(
    n: usize,
    symmetric: bool,
    rng: &mut R,
) -> Result<WeightedDigraph> {
    if n < 2 {
        return Err(Error::InvalidArgument("random graphs need n >= 2".into()));
    }
    let p = (2.0 * (n as f64).ln() / n as f64).min(1.0);
    loop {
        let g = erdos_renyi(n, p, (0.5, 2.0), symmetric, rng)?;
        if is_strongly_connected(&g) {
            return Ok(g);
        }
    }
}
