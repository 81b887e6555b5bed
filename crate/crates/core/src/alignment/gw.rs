//! Entropic Gromov-Wasserstein between two similarity structures.
//!
//! The square-loss GW objective `Σ (C1[i,k] - C2[j,l])² T[i,j] T[k,l]` is
//! minimized by mirror descent: each outer step linearizes the objective at
//! the current coupling and solves the resulting entropic OT problem with
//! Sinkhorn scaling under uniform marginals.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rsa::{SimilarityKind, SimilarityMatrix};
use crate::error::{Error, Result};

/// Scalings beyond this are folded back into the dual potentials.
const ABSORB_THRESHOLD: f64 = 1e100;
/// Ratio between successive epsilons when annealing a single Sinkhorn solve.
const EPS_SCALING_FACTOR: f64 = 4.0;
/// Relative marginal error accepted at the coarse annealing stages.
const COARSE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Fixed,
    /// `steps` stages with epsilon `eps * ratio^(steps-1) ... eps`, each warm
    /// started from the previous coupling.
    Geometric { steps: usize, ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwParams {
    pub epsilon: f64,
    pub max_outer: usize,
    /// Outer loop stops when the max-abs coupling change falls below this.
    pub tol: f64,
    pub sinkhorn_max_iter: usize,
    /// Largest relative row marginal error accepted by the inner solver.
    pub sinkhorn_tol: f64,
    pub schedule: EpsilonSchedule,
    /// Swap evaluations spent on the permutation search start. The start is
    /// dropped when no search finishes within the budget; 0 disables it.
    pub search_budget: usize,
    /// The permutation search start is only tried up to this many items.
    pub search_max_n: usize,
    pub seed: u64,
}

impl Default for GwParams {
    fn default() -> Self {
        GwParams {
            epsilon: 5e-3,
            max_outer: 500,
            tol: 1e-9,
            sinkhorn_max_iter: 2000,
            sinkhorn_tol: 1e-9,
            schedule: EpsilonSchedule::Fixed,
            search_budget: 200_000,
            search_max_n: 64,
            seed: 0,
        }
    }
}

impl GwParams {
    pub fn with_geometric_schedule(mut self) -> Self {
        self.schedule = EpsilonSchedule::Geometric { steps: 3, ratio: 10.0 };
        self
    }

    fn epsilons(&self) -> Result<Vec<f64>> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        match self.schedule {
            EpsilonSchedule::Fixed => Ok(vec![self.epsilon]),
            EpsilonSchedule::Geometric { steps, ratio } => {
                if steps == 0 || !(ratio >= 1.0) {
                    return Err(Error::Argument(format!(
                        "epsilon schedule needs steps >= 1 and ratio >= 1, got {steps}, {ratio}"
                    )));
                }
                Ok((0..steps)
                    .rev()
                    .map(|k| self.epsilon * ratio.powi(k as i32))
                    .collect())
            }
        }
    }
}

/// Transport plan between n text items and n color items.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub plan: Array2<f64>,
    pub epsilon: f64,
}

impl Coupling {
    pub fn len(&self) -> usize {
        self.plan.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }

    /// Largest deviation of any row sum and any column sum from `1/n`.
    pub fn marginal_errors(&self) -> (f64, f64) {
        let target = 1.0 / self.len() as f64;
        let row = self.plan.sum_axis(Axis(1)).iter().fold(0.0f64, |m, s| m.max((s - target).abs()));
        let col = self.plan.sum_axis(Axis(0)).iter().fold(0.0f64, |m, s| m.max((s - target).abs()));
        (row, col)
    }

    /// Fraction of rows whose unique argmax is the diagonal. Tied maxima count
    /// as misses.
    pub fn matching_accuracy(&self) -> f64 {
        let n = self.len();
        if n == 0 {
            return 0.0;
        }
        let hits = self
            .plan
            .axis_iter(Axis(0))
            .enumerate()
            .filter(|(i, row)| {
                let diag = row[*i];
                row.iter().enumerate().all(|(j, v)| j == *i || *v < diag)
            })
            .count();
        hits as f64 / n as f64
    }
}

/// Dual potentials carried between Sinkhorn solves.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub f: Array1<f64>,
    pub g: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutput {
    pub plan: Array2<f64>,
    pub potentials: Potentials,
    pub iterations: usize,
    pub log_domain: bool,
}

fn gibbs_kernel(cost: ArrayView2<'_, f64>, pot: &Potentials, eps: f64) -> Array2<f64> {
    let mut k = Array2::zeros(cost.dim());
    Zip::indexed(&mut k).and(cost).for_each(|(i, j), kij, &c| {
        *kij = ((pot.f[i] + pot.g[j] - c) / eps).exp();
    });
    k
}

fn usable(values: &Array1<f64>) -> bool {
    values.iter().all(|v| v.is_finite() && *v > 0.0)
}

/// Initial potentials that put a 1 on every row of the kernel.
fn row_min_potentials(cost: ArrayView2<'_, f64>) -> Potentials {
    let f = cost
        .axis_iter(Axis(0))
        .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    Potentials {
        f,
        g: Array1::zeros(cost.ncols()),
    }
}

/// Scaling iterations on a potential-stabilized kernel. `None` on underflow.
fn sinkhorn_scaling(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    cost: ArrayView2<'_, f64>,
    eps: f64,
    mut pot: Potentials,
    max_iter: usize,
    tol: f64,
) -> Option<SinkhornOutput> {
    let mut k = gibbs_kernel(cost, &pot, eps);
    let mut u = Array1::<f64>::ones(a.len());
    let mut v = Array1::<f64>::ones(b.len());
    let mut ktu = Array1::<f64>::zeros(b.len());
    let mut iterations = 0;
    loop {
        let kv = k.dot(&v);
        // Row error of the current (u, v); the column marginals are exact
        // right after a v update.
        let err = (0..a.len()).fold(0.0f64, |m, i| m.max((u[i] * kv[i] - a[i]).abs() / a[i]));
        if err < tol || iterations >= max_iter {
            break;
        }
        iterations += 1;
        Zip::from(&mut u).and(&a).and(&kv).for_each(|u, &a, &kv| *u = a / kv);
        if !usable(&u) {
            return None;
        }
        ktu.fill(0.0);
        for (row, &ui) in k.axis_iter(Axis(0)).zip(u.iter()) {
            ktu.scaled_add(ui, &row);
        }
        Zip::from(&mut v).and(&b).and(&ktu).for_each(|v, &b, &s| *v = b / s);
        if !usable(&v) {
            return None;
        }
        let extreme = |x: &Array1<f64>| x.iter().any(|s| *s > ABSORB_THRESHOLD || *s < 1.0 / ABSORB_THRESHOLD);
        if extreme(&u) || extreme(&v) {
            pot.f.zip_mut_with(&u, |f, s| *f += eps * s.ln());
            pot.g.zip_mut_with(&v, |g, s| *g += eps * s.ln());
            k = gibbs_kernel(cost, &pot, eps);
            u.fill(1.0);
            v.fill(1.0);
        }
    }
    pot.f.zip_mut_with(&u, |f, s| *f += eps * s.ln());
    pot.g.zip_mut_with(&v, |g, s| *g += eps * s.ln());
    let plan = gibbs_kernel(cost, &pot, eps);
    if plan.iter().any(|p| !p.is_finite()) {
        return None;
    }
    Some(SinkhornOutput {
        plan,
        potentials: pot,
        iterations,
        log_domain: false,
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Dual updates entirely in the log domain.
fn sinkhorn_log(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    cost: ArrayView2<'_, f64>,
    eps: f64,
    mut pot: Potentials,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    let (n, m) = cost.dim();
    let log_a = a.mapv(f64::ln);
    let log_b = b.mapv(f64::ln);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for i in 0..n {
            let row = cost.row(i);
            let g = &pot.g;
            pot.f[i] = eps * log_a[i] - eps * log_sum_exp((0..m).map(|j| (g[j] - row[j]) / eps));
        }
        for j in 0..m {
            let col = cost.column(j);
            let f = &pot.f;
            pot.g[j] = eps * log_b[j] - eps * log_sum_exp((0..n).map(|i| (f[i] - col[i]) / eps));
        }
        if iterations % 10 == 0 || iterations == max_iter {
            let plan = gibbs_kernel(cost, &pot, eps);
            let err = plan
                .sum_axis(Axis(1))
                .iter()
                .zip(a.iter())
                .fold(0.0f64, |acc, (s, t)| acc.max((s - t).abs() / t));
            if !err.is_finite() {
                return Err(Error::Solver {
                    iterations,
                    message: "log-domain Sinkhorn produced non-finite potentials".into(),
                });
            }
            if err < tol {
                break;
            }
        }
    }
    let plan = gibbs_kernel(cost, &pot, eps);
    if plan.iter().any(|p| !p.is_finite()) || pot.f.iter().chain(pot.g.iter()).any(|p| !p.is_finite()) {
        return Err(Error::Solver {
            iterations,
            message: "log-domain Sinkhorn produced non-finite potentials".into(),
        });
    }
    Ok(SinkhornOutput {
        plan,
        potentials: pot,
        iterations,
        log_domain: true,
    })
}

/// Projects a nonnegative plan onto the exact transport polytope with
/// marginals `a`, `b` (Altschuler et al. rounding).
pub fn round_to_marginals(plan: &mut Array2<f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) {
    for (i, mut row) in plan.axis_iter_mut(Axis(0)).enumerate() {
        let s = row.sum();
        if s > a[i] {
            row.mapv_inplace(|v| v * a[i] / s);
        }
    }
    for (j, mut col) in plan.axis_iter_mut(Axis(1)).enumerate() {
        let s = col.sum();
        if s > b[j] {
            col.mapv_inplace(|v| v * b[j] / s);
        }
    }
    let err_r: Array1<f64> = &a - &plan.sum_axis(Axis(1));
    let err_c: Array1<f64> = &b - &plan.sum_axis(Axis(0));
    let mass: f64 = err_r.iter().map(|v| v.max(0.0)).sum();
    if mass > 0.0 {
        Zip::indexed(plan).for_each(|(i, j), p| {
            *p += err_r[i].max(0.0) * err_c[j].max(0.0) / mass;
        });
    }
}

/// Entropic OT between marginals `a` and `b` under `cost`.
///
/// The solve is annealed from an epsilon near the cost range down to `eps`,
/// carrying potentials between stages. Each stage runs scaling iterations
/// first and falls back to the log domain on underflow. The returned plan is
/// rounded onto the exact marginals.
pub fn sinkhorn(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    cost: ArrayView2<'_, f64>,
    eps: f64,
    warm: Option<&Potentials>,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    if cost.dim() != (a.len(), b.len()) {
        return Err(Error::Argument(format!(
            "cost shape {:?} does not match marginals ({}, {})",
            cost.dim(),
            a.len(),
            b.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("Sinkhorn cost must be finite".into()));
    }
    let range = cost.iter().fold(f64::NEG_INFINITY, |m, &c| m.max(c)) - cost.iter().fold(f64::INFINITY, |m, &c| m.min(c));
    let mut coarse = Vec::new();
    let mut e = eps * EPS_SCALING_FACTOR;
    while e < range {
        coarse.push(e);
        e *= EPS_SCALING_FACTOR;
    }
    let mut pot = warm.cloned().unwrap_or_else(|| row_min_potentials(cost));
    let mut iterations = 0;
    let mut log_domain = false;
    for &e in coarse.iter().rev() {
        let out = solve_at(a, b, cost, e, pot, max_iter, COARSE_TOL)?;
        iterations += out.iterations;
        log_domain |= out.log_domain;
        pot = out.potentials;
    }
    let mut out = solve_at(a, b, cost, eps, pot, max_iter, tol)?;
    out.iterations += iterations;
    out.log_domain |= log_domain;
    round_to_marginals(&mut out.plan, a, b);
    Ok(out)
}

fn solve_at(
    a: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
    cost: ArrayView2<'_, f64>,
    eps: f64,
    start: Potentials,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornOutput> {
    match sinkhorn_scaling(a, b, cost, eps, start.clone(), max_iter, tol) {
        Some(out) => Ok(out),
        None => {
            log::debug!("Sinkhorn scaling underflowed at epsilon {eps}; retrying in log domain");
            sinkhorn_log(a, b, cost, eps, start, max_iter, tol)
        }
    }
}

/// Square-loss GW objective of `plan`.
pub fn gw_cost(c1: ArrayView2<'_, f64>, c2: ArrayView2<'_, f64>, plan: ArrayView2<'_, f64>) -> f64 {
    let p = plan.sum_axis(Axis(1));
    let q = plan.sum_axis(Axis(0));
    let c1_sq = c1.mapv(|v| v * v);
    let c2_sq = c2.mapv(|v| v * v);
    let cross = c1.dot(&plan).dot(&c2.t());
    let value = p.dot(&c1_sq.dot(&p)) + q.dot(&c2_sq.dot(&q)) - 2.0 * (&cross * &plan).sum();
    value.max(0.0)
}

/// Brute-force GW objective straight from the quadruple sum. O(n⁴).
pub fn gw_cost_naive(c1: ArrayView2<'_, f64>, c2: ArrayView2<'_, f64>, plan: ArrayView2<'_, f64>) -> f64 {
    let (n, m) = plan.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            for k in 0..n {
                for l in 0..m {
                    total += (c1[[i, k]] - c2[[j, l]]).powi(2) * plan[[i, j]] * plan[[k, l]];
                }
            }
        }
    }
    total
}

/// Gradient of the GW objective at `plan` (uniform marginals `p`, `q`).
fn gw_gradient(
    c1: ArrayView2<'_, f64>,
    c2: ArrayView2<'_, f64>,
    c1_sq_p: &Array1<f64>,
    c2_sq_q: &Array1<f64>,
    plan: &Array2<f64>,
) -> Array2<f64> {
    let mut grad = c1.dot(plan).dot(&c2.t());
    Zip::indexed(&mut grad).for_each(|(i, j), g| {
        *g = 2.0 * (c1_sq_p[i] + c2_sq_q[j] - 2.0 * *g);
    });
    grad
}

/// Where a mirror-descent run begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Start {
    /// Entropic OT between sorted similarity profiles: row i of `c1` and
    /// row j of `c2` are compared as 1-D distributions.
    Profile,
    /// The independent coupling `p qᵀ`.
    Product,
    /// The best permutation found by seeded multi-start 2-swap search.
    Search { seed: u64, restarts: usize },
}

impl Start {
    /// 0 profile, 1 product, 2 search.
    pub fn index(self) -> usize {
        match self {
            Start::Profile => 0,
            Start::Product => 1,
            Start::Search { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwSolution {
    pub coupling: Coupling,
    pub cost: f64,
    pub matching_accuracy: f64,
    /// The start that produced the lowest-cost coupling.
    pub start: Start,
    pub starts_tried: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub sinkhorn_iterations: usize,
    pub log_domain_solves: usize,
}

struct Run {
    plan: Array2<f64>,
    cost: f64,
    outer: usize,
    converged: bool,
    sinkhorn_iterations: usize,
    log_domain_solves: usize,
}

/// Squared 1-D Wasserstein distance between the sorted rows of `c1` and `c2`.
fn profile_cost(c1: ArrayView2<'_, f64>, c2: ArrayView2<'_, f64>) -> Array2<f64> {
    let sorted = |c: ArrayView2<'_, f64>| -> Vec<Vec<f64>> {
        c.axis_iter(Axis(0))
            .map(|r| {
                let mut v = r.to_vec();
                v.sort_by(f64::total_cmp);
                v
            })
            .collect()
    };
    let (s1, s2) = (sorted(c1), sorted(c2));
    let n = c1.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        s1[i].iter().zip(&s2[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64
    })
}

/// Multi-start 2-swap local search on `Σ C1[i,k] C2[π(i),π(k)]`, which the
/// GW cost of a permutation coupling decreases in. Random permutations are
/// improved until no swap helps, for as long as `budget` swap evaluations
/// last. Returns the best local optimum and the number of searches that
/// finished, or `None` if none did. Both matrices must be symmetric.
fn search_permutation(c1: ArrayView2<'_, f64>, c2: ArrayView2<'_, f64>, seed: u64, budget: usize) -> Option<(Vec<usize>, usize)> {
    let n = c1.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut spent = 0;
    let mut finished = 0;
    'starts: loop {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut b = Array2::from_shape_fn((n, n), |(i, k)| c2[[perm[i], perm[k]]]);
        let mut value = Zip::from(c1).and(&b).fold(0.0, |acc, x, y| acc + x * y);
        let mut improved = true;
        while improved {
            improved = false;
            for r in 0..n {
                for s in r + 1..n {
                    if spent == budget {
                        break 'starts;
                    }
                    spent += 1;
                    let mut delta = (c1[[r, r]] - c1[[s, s]]) * (b[[s, s]] - b[[r, r]]);
                    for k in 0..n {
                        if k != r && k != s {
                            delta += 2.0 * (c1[[r, k]] - c1[[s, k]]) * (b[[s, k]] - b[[r, k]]);
                        }
                    }
                    if delta > 1e-12 {
                        value += delta;
                        perm.swap(r, s);
                        for k in 0..n {
                            b.swap([r, k], [s, k]);
                        }
                        for k in 0..n {
                            b.swap([k, r], [k, s]);
                        }
                        improved = true;
                    }
                }
            }
        }
        finished += 1;
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, perm));
        }
    }
    best.map(|(_, perm)| (perm, finished))
}

fn permutation_plan(perm: &[usize]) -> Array2<f64> {
    let n = perm.len();
    let mut plan = Array2::zeros((n, n));
    for (i, &j) in perm.iter().enumerate() {
        plan[[i, j]] = 1.0 / n as f64;
    }
    plan
}

fn with_outer(e: Error, outer: usize) -> Error {
    match e {
        Error::Solver { iterations, message } => Error::Solver {
            iterations,
            message: format!("outer iteration {outer}: {message}"),
        },
        other => other,
    }
}

fn descend(
    c1: ArrayView2<'_, f64>,
    c2: ArrayView2<'_, f64>,
    mut plan: Array2<f64>,
    epsilons: &[f64],
    params: &GwParams,
) -> Result<Run> {
    let n = c1.nrows();
    let uniform = Array1::from_elem(n, 1.0 / n as f64);
    let c1_sq_p = c1.mapv(|v| v * v).dot(&uniform);
    let c2_sq_q = c2.mapv(|v| v * v).dot(&uniform);
    let mut run = Run {
        plan: Array2::zeros((0, 0)),
        cost: 0.0,
        outer: 0,
        converged: false,
        sinkhorn_iterations: 0,
        log_domain_solves: 0,
    };
    for &eps in epsilons {
        run.converged = false;
        let mut potentials: Option<Potentials> = None;
        for _ in 0..params.max_outer {
            run.outer += 1;
            let grad = gw_gradient(c1, c2, &c1_sq_p, &c2_sq_q, &plan);
            let out = sinkhorn(
                uniform.view(),
                uniform.view(),
                grad.view(),
                eps,
                potentials.as_ref(),
                params.sinkhorn_max_iter,
                params.sinkhorn_tol,
            )
            .map_err(|e| with_outer(e, run.outer))?;
            run.log_domain_solves += usize::from(out.log_domain);
            run.sinkhorn_iterations += out.iterations;
            let change = (&out.plan - &plan).iter().fold(0.0f64, |m, d| m.max(d.abs()));
            plan = out.plan;
            potentials = Some(out.potentials);
            if change < params.tol {
                run.converged = true;
                break;
            }
        }
    }
    run.cost = gw_cost(c1, c2, plan.view());
    run.plan = plan;
    Ok(run)
}

/// Entropic GW between two n×n similarity matrices with uniform marginals.
///
/// Mirror descent is run from the profile start, the product start and the
/// permutation search start; the lowest-cost coupling wins, ties going to
/// the earlier start.
pub fn entropic_gw(c1: ArrayView2<'_, f64>, c2: ArrayView2<'_, f64>, params: &GwParams) -> Result<GwSolution> {
    let n = c1.nrows();
    if c1.ncols() != n || c2.dim() != (n, n) {
        return Err(Error::Argument(format!(
            "similarity matrices must both be n×n, got {:?} and {:?}",
            c1.dim(),
            c2.dim()
        )));
    }
    if n < 2 {
        return Err(Error::Argument(format!("gw needs at least 2 items, got {n}")));
    }
    if params.max_outer == 0 {
        return Err(Error::Argument("max_outer must be at least 1".into()));
    }
    if c1.iter().chain(c2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("similarity matrices must be finite".into()));
    }
    let epsilons = params.epsilons()?;
    let uniform = Array1::from_elem(n, 1.0 / n as f64);

    let mut starts = vec![Start::Profile, Start::Product];
    let search = if n <= params.search_max_n {
        search_permutation(c1, c2, params.seed, params.search_budget)
    } else {
        None
    };
    if let Some((_, restarts)) = &search {
        starts.push(Start::Search {
            seed: params.seed,
            restarts: *restarts,
        });
    }
    let runs: Vec<Result<Run>> = starts
        .par_iter()
        .map(|start| {
            let plan = match *start {
                Start::Profile => {
                    let cost = profile_cost(c1, c2);
                    sinkhorn(
                        uniform.view(),
                        uniform.view(),
                        cost.view(),
                        epsilons[0],
                        None,
                        params.sinkhorn_max_iter,
                        params.sinkhorn_tol,
                    )?
                    .plan
                }
                Start::Product => Array2::from_elem((n, n), 1.0 / (n * n) as f64),
                Start::Search { .. } => permutation_plan(&search.as_ref().expect("search finished").0),
            };
            descend(c1, c2, plan, &epsilons, params)
        })
        .collect();

    let mut best: Option<(Start, Run)> = None;
    for (start, run) in starts.iter().zip(runs) {
        let run = run?;
        if best.as_ref().is_none_or(|(_, b)| run.cost < b.cost) {
            best = Some((*start, run));
        }
    }
    let (start, run) = best.expect("at least two starts");
    let coupling = Coupling {
        plan: run.plan,
        epsilon: *epsilons.last().expect("non-empty schedule"),
    };
    let matching_accuracy = coupling.matching_accuracy();
    Ok(GwSolution {
        coupling,
        cost: run.cost,
        matching_accuracy,
        start,
        starts_tried: starts.len(),
        outer_iterations: run.outer,
        converged: run.converged,
        sinkhorn_iterations: run.sinkhorn_iterations,
        log_domain_solves: run.log_domain_solves,
    })
}

/// GW alignment of row-aligned point sets via their cosine similarity
/// matrices. Row i of `x` is expected to correspond to row i of `y`.
pub fn align_points(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, params: &GwParams) -> Result<GwSolution> {
    if x.nrows() != y.nrows() {
        return Err(Error::Argument(format!("row counts differ: {} vs {}", x.nrows(), y.nrows())));
    }
    let text = SimilarityMatrix::cosine(x, SimilarityKind::Text)?;
    let color = SimilarityMatrix::cosine(y, SimilarityKind::Color)?;
    entropic_gw(text.values.view(), color.values.view(), params)
}
