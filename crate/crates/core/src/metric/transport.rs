//! Discrete optimal transport: transportation simplex and log-domain Sinkhorn.

use std::collections::VecDeque;

use crate::autograd::Mat;
use crate::error::{Error, Result};

const MAX_PIVOTS: usize = 100_000;
const REDUCED_COST_TOL: f64 = 1e-12;

/// Optimal plan and cost of a balanced transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub plan: Mat,
    pub cost: f64,
}

fn check_inputs(cost: &Mat, a: &[f64], b: &[f64]) -> Result<()> {
    if cost.dim() != (a.len(), b.len()) {
        return Err(Error::Shape(format!(
            "cost {:?} for marginals of length {} and {}",
            cost.dim(),
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("empty marginal".into()));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > 1e-9 * sa.max(1.0) {
        return Err(Error::Validation(format!("unbalanced marginals: {sa} vs {sb}")));
    }
    Ok(())
}

/// Exact minimum-cost transport by the transportation simplex
/// (northwest-corner start, MODI pricing).
pub fn transport_exact(cost: &Mat, a: &[f64], b: &[f64]) -> Result<TransportPlan> {
    check_inputs(cost, a, b)?;
    let (m, n) = cost.dim();
    let mut flow = Mat::zeros((m, n));
    let mut basic = vec![vec![false; n]; m];

    // northwest corner; degenerate steps keep a zero basic cell so the basis stays a tree
    let (mut supply, mut demand) = (a.to_vec(), b.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let x = supply[i].min(demand[j]);
        flow[[i, j]] = x;
        basic[i][j] = true;
        supply[i] -= x;
        demand[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if (supply[i] <= demand[j] && i < m - 1) || j == n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    for _ in 0..MAX_PIVOTS {
        let (u, v) = potentials(cost, &basic);
        let mut entering = None;
        let mut best = -REDUCED_COST_TOL;
        for i in 0..m {
            for j in 0..n {
                if !basic[i][j] {
                    let r = cost[[i, j]] - u[i] - v[j];
                    if r < best {
                        best = r;
                        entering = Some((i, j));
                    }
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let total = flow.iter().zip(cost.iter()).map(|(f, c)| f * c).sum::<f64>();
            return Ok(TransportPlan { plan: flow, cost: total.max(0.0) });
        };
        let cycle = basis_path(&basic, ej, ei);
        // cycle alternates: entering (+), then cells along the path (-, +, ...)
        let (theta, leave) = cycle
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&(i, j)| (flow[[i, j]], (i, j)))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .expect("cycle has a minus cell");
        for (k, &(i, j)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                flow[[i, j]] += theta;
            } else {
                flow[[i, j]] -= theta;
            }
        }
        basic[ei][ej] = true;
        basic[leave.0][leave.1] = false;
        flow[[leave.0, leave.1]] = 0.0;
    }
    Err(Error::NoConvergence {
        iterations: MAX_PIVOTS,
        residual: f64::NAN,
    })
}

/// Dual potentials with `u[0] = 0` from the basic cells.
fn potentials(cost: &Mat, basic: &[Vec<bool>]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = cost.dim();
    let mut u = vec![None; m];
    let mut v = vec![None; n];
    u[0] = Some(0.0);
    let mut queue = VecDeque::from([(true, 0usize)]);
    while let Some((is_row, k)) = queue.pop_front() {
        if is_row {
            let ui = u[k].unwrap();
            for j in 0..n {
                if basic[k][j] && v[j].is_none() {
                    v[j] = Some(cost[[k, j]] - ui);
                    queue.push_back((false, j));
                }
            }
        } else {
            let vj = v[k].unwrap();
            for i in 0..m {
                if basic[i][k] && u[i].is_none() {
                    u[i] = Some(cost[[i, k]] - vj);
                    queue.push_back((true, i));
                }
            }
        }
    }
    (
        u.into_iter().map(|x| x.expect("basis spans rows")).collect(),
        v.into_iter().map(|x| x.expect("basis spans columns")).collect(),
    )
}

/// Cells forming the cycle closed by entering cell `(row, col)`: starts
/// with the entering cell and then walks the tree path from `col` back to `row`.
fn basis_path(basic: &[Vec<bool>], col: usize, row: usize) -> Vec<(usize, usize)> {
    let (m, n) = (basic.len(), basic[0].len());
    // nodes: rows 0..m, columns m..m+n
    let mut parent = vec![usize::MAX; m + n];
    let start = m + col;
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        let neighbours: Vec<usize> = if node < m {
            (0..n).filter(|&j| basic[node][j]).map(|j| m + j).collect()
        } else {
            (0..m).filter(|&i| basic[i][node - m]).collect()
        };
        for nb in neighbours {
            if parent[nb] == usize::MAX {
                parent[nb] = node;
                queue.push_back(nb);
            }
        }
    }
    let mut cells = vec![(row, col)];
    let mut node = row;
    while node != start {
        let p = parent[node];
        let cell = if node < m { (node, p - m) } else { (p, node - m) };
        cells.push(cell);
        node = p;
    }
    cells
}

/// Entropic transport solved in the log domain with ε-scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    /// L1 marginal violation at which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 1e-3,
            tolerance: 1e-6,
            max_iterations: 200_000,
        }
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Transport cost `<P, C>` of the entropic plan.
pub fn transport_sinkhorn(cost: &Mat, a: &[f64], b: &[f64], config: &SinkhornConfig) -> Result<TransportPlan> {
    check_inputs(cost, a, b)?;
    let (m, n) = cost.dim();
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let c_max = cost.iter().copied().fold(0.0, f64::max);
    let mut eps = c_max.max(config.epsilon);
    let mut iterations = 0;
    let plan_at = |f: &[f64], g: &[f64], eps: f64| {
        Mat::from_shape_fn((m, n), |(i, j)| ((f[i] + g[j] - cost[[i, j]]) / eps).exp())
    };
    loop {
        let final_stage = eps <= config.epsilon;
        loop {
            for i in 0..m {
                f[i] = eps * log_a[i] - eps * log_sum_exp((0..n).map(|j| (g[j] - cost[[i, j]]) / eps));
            }
            for j in 0..n {
                g[j] = eps * log_b[j] - eps * log_sum_exp((0..m).map(|i| (f[i] - cost[[i, j]]) / eps));
            }
            iterations += 1;
            // columns are exact after the g update; check rows
            let plan = plan_at(&f, &g, eps);
            let err: f64 = (0..m).map(|i| (plan.row(i).sum() - a[i]).abs()).sum();
            let tol = if final_stage { config.tolerance } else { config.tolerance.max(1e-6) };
            if err <= tol {
                break;
            }
            if iterations >= config.max_iterations {
                return Err(Error::NoConvergence { iterations, residual: err });
            }
        }
        if final_stage {
            break;
        }
        eps = (eps * 0.5).max(config.epsilon);
    }
    let plan = plan_at(&f, &g, eps);
    let total = plan.iter().zip(cost.iter()).map(|(p, c)| p * c).sum::<f64>();
    Ok(TransportPlan { plan, cost: total })
}
