//! Entropic optimal transport between discrete distributions.
//!
//! The workhorse is [`sinkhorn`], a log-domain (stabilized) Sinkhorn solver for
//!
//! ```text
//! min_{T in Pi(a,b)}  <T, C> + eps * sum_ij T_ij ln T_ij
//! ```
//!
//! Potentials are carried in the log domain so the kernel `exp(-C/eps)` is
//! never materialized; this keeps small `eps` (0.01 and below) usable with
//! cosine-scale costs where naive scaling underflows.
//!
//! [`exact_ot_small`] solves the unregularized problem exactly with a
//! transportation simplex and exists to verify the entropic solver on
//! desk-scale instances.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Probability mass per atom of a discrete distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    weights: Array1<f64>,
}

impl DiscreteDistribution {
    /// Validates nonnegativity and unit total mass (within 1e-9).
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "entry {i} is {w}, must be finite and nonnegative"
                )));
            }
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!(
                "mass sums to {total}, must be 1 within 1e-9"
            )));
        }
        Ok(Self { weights })
    }

    pub fn from_slice(weights: &[f64]) -> Result<Self> {
        Self::new(Array1::from_vec(weights.to_vec()))
    }

    /// Uniform mass 1/n over n atoms.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: Array1::from_elem(n, 1.0 / n as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }
}

/// Transport cost per atom pair; entries finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    values: Array2<f64>,
}

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        for ((i, j), &v) in values.indexed_iter() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFiniteCost {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut values = Array2::zeros((n, m));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "cost row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Self::new(values)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v))
    }
}

/// A coupling of two discrete distributions together with solve diagnostics.
///
/// Entries from the entropic solver are strictly positive in exact arithmetic;
/// in floating point, entries far from the optimal support may underflow to
/// +0.0 at small `eps`. Entries from the exact solver are nonnegative.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub values: Array2<f64>,
    pub row_marginal: DiscreteDistribution,
    pub col_marginal: DiscreteDistribution,
    /// `<T, C>` of the returned plan (transport cost without the entropy term).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl TransportPlan {
    /// L1 violations of the prescribed marginals: (row, column).
    pub fn marginal_violation(&self) -> (f64, f64) {
        let row_sums = self.values.sum_axis(ndarray::Axis(1));
        let col_sums = self.values.sum_axis(ndarray::Axis(0));
        let row_l1 = row_sums
            .iter()
            .zip(self.row_marginal.weights().iter())
            .map(|(s, a)| (s - a).abs())
            .sum();
        let col_l1 = col_sums
            .iter()
            .zip(self.col_marginal.weights().iter())
            .map(|(s, b)| (s - b).abs())
            .sum();
        (row_l1, col_l1)
    }
}

fn check_dims(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    cost: &CostMatrix,
) -> Result<(usize, usize)> {
    let (n, m) = cost.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "marginals {}x{} vs cost {n}x{m}",
            a.len(),
            b.len()
        )));
    }
    Ok((n, m))
}

/// Log-sum-exp over an iterator of values; -inf for an empty set.
fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Entropic OT by alternating marginal scaling in the log domain.
///
/// Every atom of `a` and `b` must carry positive mass; callers drop zero-mass
/// atoms beforehand. `converged` is true iff the worse of the two marginal L1
/// violations fell below `tol` within `max_iter` iterations; otherwise the
/// current plan is returned with `converged = false`.
pub fn sinkhorn(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    cost: &CostMatrix,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let (n, m) = check_dims(a, b, cost)?;
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidDistribution(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if let Some(i) = a.weights().iter().position(|&w| w == 0.0) {
        return Err(Error::ZeroMassAtom(i));
    }
    if let Some(j) = b.weights().iter().position(|&w| w == 0.0) {
        return Err(Error::ZeroMassAtom(j));
    }

    // The only place a too-small epsilon can blow up the log domain.
    if cost.values().iter().any(|&c| !(c / epsilon).is_finite()) {
        return Err(Error::NumericalUnderflow { epsilon });
    }

    let c = cost.values();
    let log_a = a.weights().mapv(f64::ln);
    let log_b = b.weights().mapv(f64::ln);
    // Dual potentials in cost units, shared across the annealing schedule.
    let mut f = Array1::<f64>::zeros(n);
    let mut g = Array1::<f64>::zeros(m);

    // Epsilon scaling: start at the cost scale and halve toward the target,
    // warm-starting the potentials. Iterating at a tiny epsilon from cold
    // stalls for hundreds of iterations; the schedule reaches the same fixed
    // point in a handful.
    let eps_start = cost.max_value().max(epsilon);

    let plan_from = |f: &Array1<f64>, g: &Array1<f64>| -> Array2<f64> {
        Array2::from_shape_fn((n, m), |(i, j)| ((f[i] + g[j] - c[[i, j]]) / epsilon).exp())
    };

    let mut eps_cur = eps_start;
    let mut iterations = 0;
    let mut converged = false;
    let mut values = plan_from(&f, &g);
    while iterations < max_iter {
        for i in 0..n {
            let lse = logsumexp((0..m).map(|j| (g[j] - c[[i, j]]) / eps_cur));
            f[i] = eps_cur * (log_a[i] - lse);
        }
        for j in 0..m {
            let lse = logsumexp((0..n).map(|i| (f[i] - c[[i, j]]) / eps_cur));
            g[j] = eps_cur * (log_b[j] - lse);
        }
        iterations += 1;

        if f.iter().chain(g.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NumericalUnderflow { epsilon });
        }

        if eps_cur > epsilon {
            // Still annealing; the iterate solves the wrong temperature, so
            // no convergence test yet.
            eps_cur = (eps_cur * 0.5).max(epsilon);
            continue;
        }

        values = plan_from(&f, &g);
        let row_sums = values.sum_axis(ndarray::Axis(1));
        let col_sums = values.sum_axis(ndarray::Axis(0));
        let row_l1: f64 = row_sums
            .iter()
            .zip(a.weights().iter())
            .map(|(s, w)| (s - w).abs())
            .sum();
        let col_l1: f64 = col_sums
            .iter()
            .zip(b.weights().iter())
            .map(|(s, w)| (s - w).abs())
            .sum();
        if row_l1.max(col_l1) <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        values = plan_from(&f, &g);
    }

    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalUnderflow { epsilon });
    }
    let objective = (&values * cost.values()).sum();
    Ok(TransportPlan {
        values,
        row_marginal: a.clone(),
        col_marginal: b.clone(),
        objective,
        iterations,
        converged,
    })
}

/// Cell cap for [`exact_ot_small`]; the oracle is for desk-scale verification.
pub const EXACT_OT_MAX_CELLS: usize = 64;

/// Exact unregularized OT on a small instance via the transportation simplex.
///
/// Starts from a northwest-corner basic feasible solution and pivots with
/// Bland's rule (lowest-index entering and leaving variables), which rules out
/// cycling on degenerate instances. Returns an optimal vertex of the coupling
/// polytope; `objective` is the true OT distance up to float round-off.
pub fn exact_ot_small(
    a: &DiscreteDistribution,
    b: &DiscreteDistribution,
    cost: &CostMatrix,
) -> Result<TransportPlan> {
    let (n, m) = check_dims(a, b, cost)?;
    if n * m > EXACT_OT_MAX_CELLS {
        return Err(Error::InstanceTooLarge {
            cells: n * m,
            cap: EXACT_OT_MAX_CELLS,
        });
    }
    let c = cost.values();

    // Northwest-corner staircase: exactly n+m-1 basic cells, zeros allowed.
    let mut values = Array2::<f64>::zeros((n, m));
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(n + m - 1);
    {
        let mut ra = a.weights().to_vec();
        let mut cb = b.weights().to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let t = ra[i].min(cb[j]).max(0.0);
            values[[i, j]] = t;
            basis.push((i, j));
            ra[i] -= t;
            cb[j] -= t;
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 {
                i += 1;
            } else if ra[i] <= 0.0 {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let reduced_cost_tol = 1e-11 * (1.0 + cost.max_value());
    let max_pivots = 1000 * (n + m) * (n + m);
    let mut pivots = 0usize;

    let mut in_basis = vec![false; n * m];
    for &(i, j) in &basis {
        in_basis[i * m + j] = true;
    }

    for _ in 0..max_pivots {
        // Dual potentials from the basis tree: u_i + v_j = c_ij on basic cells.
        let mut u = vec![f64::NAN; n];
        let mut v = vec![f64::NAN; m];
        u[0] = 0.0;
        loop {
            let mut progressed = false;
            for &(i, j) in &basis {
                match (u[i].is_nan(), v[j].is_nan()) {
                    (false, true) => {
                        v[j] = c[[i, j]] - u[i];
                        progressed = true;
                    }
                    (true, false) => {
                        u[i] = c[[i, j]] - v[j];
                        progressed = true;
                    }
                    _ => {}
                }
            }
            if !progressed {
                break;
            }
        }
        if u.iter().any(|x| x.is_nan()) || v.iter().any(|x| x.is_nan()) {
            return Err(Error::Internal("basis graph not spanning".into()));
        }

        // Bland entering rule: lowest linear index with negative reduced cost.
        let mut entering = None;
        'scan: for i in 0..n {
            for j in 0..m {
                if !in_basis[i * m + j] && c[[i, j]] - u[i] - v[j] < -reduced_cost_tol {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break; // optimal
        };
        pivots += 1;

        // Unique path row-node ei -> col-node ej in the basis tree.
        // Nodes 0..n are rows, n..n+m are columns.
        let total = n + m;
        let mut parent_edge = vec![usize::MAX; total];
        let mut visited = vec![false; total];
        let mut queue = std::collections::VecDeque::new();
        visited[ei] = true;
        queue.push_back(ei);
        while let Some(node) = queue.pop_front() {
            if node == n + ej {
                break;
            }
            for (idx, &(i, j)) in basis.iter().enumerate() {
                let (x, y) = (i, n + j);
                let next = if node == x {
                    y
                } else if node == y {
                    x
                } else {
                    continue;
                };
                if !visited[next] {
                    visited[next] = true;
                    parent_edge[next] = idx;
                    queue.push_back(next);
                }
            }
        }
        if !visited[n + ej] {
            return Err(Error::Internal(
                "entering cell disconnected from basis".into(),
            ));
        }
        let mut path = Vec::new();
        let mut node = n + ej;
        while node != ei {
            let edge = parent_edge[node];
            let (i, j) = basis[edge];
            path.push(edge);
            node = if node == n + j { i } else { n + j };
        }
        path.reverse(); // ordered from ei's side to ej's side

        // Entering gets +theta; path cells alternate -,+,-,... from ei's side.
        let minus: Vec<usize> = path.iter().copied().step_by(2).collect();
        let plus: Vec<usize> = path.iter().copied().skip(1).step_by(2).collect();
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for &edge in &minus {
            let (i, j) = basis[edge];
            let val = values[[i, j]];
            if val < theta - 1e-15 {
                theta = val;
                leaving = edge;
            } else if (val - theta).abs() <= 1e-15 {
                // Bland leaving rule: tie broken by lowest linear index.
                theta = theta.min(val);
                if leaving == usize::MAX || i * m + j < basis[leaving].0 * m + basis[leaving].1 {
                    leaving = edge;
                }
            }
        }
        if leaving == usize::MAX {
            return Err(Error::Internal("no leaving variable found".into()));
        }

        for &edge in &plus {
            let (i, j) = basis[edge];
            values[[i, j]] += theta;
        }
        for &edge in &minus {
            let (i, j) = basis[edge];
            values[[i, j]] = (values[[i, j]] - theta).max(0.0);
        }
        let (li, lj) = basis[leaving];
        in_basis[li * m + lj] = false;
        in_basis[ei * m + ej] = true;
        values[[ei, ej]] = theta;
        basis[leaving] = (ei, ej);
    }

    let objective = (&values * c).sum();
    Ok(TransportPlan {
        values,
        row_marginal: a.clone(),
        col_marginal: b.clone(),
        objective,
        iterations: pivots,
        converged: true,
    })
}
