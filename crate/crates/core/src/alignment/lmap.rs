//! Linear mapping from embeddings to CIELAB: per-channel Lasso by cyclic
//! coordinate descent, scored by cross-validated held-out R².
//!
//! Each channel minimizes `(1 / 2n) ||y - Xw||² + alpha ||w||₁` over features
//! standardized on the training fold; the target is centered so the
//! intercept is unpenalized.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNELS: [&str; 3] = ["L", "a", "b"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmapParams {
    pub alpha: f64,
    pub folds: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Stop when the largest coefficient update in a sweep is below this.
    pub tol: f64,
}

impl Default for LmapParams {
    fn default() -> Self {
        LmapParams {
            alpha: 1e-2,
            folds: 5,
            seed: 0,
            max_sweeps: 10_000,
            tol: 1e-10,
        }
    }
}

/// Fitted map `y ≈ x · weights + intercept` in the original feature units.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingWeights {
    /// d × 3.
    pub weights: Array2<f64>,
    pub intercept: [f64; 3],
    pub alpha: f64,
}

impl MappingWeights {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.dot(&self.weights);
        for mut row in out.axis_iter_mut(Axis(0)) {
            for c in 0..3 {
                row[c] += self.intercept[c];
            }
        }
        out
    }

    pub fn zero_fraction(&self) -> f64 {
        let zeros = self.weights.iter().filter(|w| **w == 0.0).count();
        zeros as f64 / self.weights.len() as f64
    }
}

/// Cross-validation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LmapFit {
    pub mapping: MappingWeights,
    /// Mean held-out R² over folds and channels.
    pub score: f64,
    /// `[fold][channel]` held-out R².
    pub held_out: Vec<[f64; 3]>,
    /// `[fold][channel]` training R².
    pub train: Vec<[f64; 3]>,
    /// Channels whose R² was defined as 0 because the target had no variance.
    pub flagged_channels: Vec<&'static str>,
}

impl LmapFit {
    pub fn mean_train_r2(&self) -> f64 {
        mean_grid(&self.train)
    }
}

fn mean_grid(grid: &[[f64; 3]]) -> f64 {
    let total: f64 = grid.iter().flatten().sum();
    total / (grid.len() * 3) as f64
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `(1 / 2n) ||y - Xw||² + alpha ||w||₁`.
pub fn lasso_objective(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>, alpha: f64) -> f64 {
    let r = &y - &x.dot(&w);
    r.dot(&r) / (2.0 * x.nrows() as f64) + alpha * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cyclic coordinate descent for the Lasso with no intercept. Returns the
/// coefficients and the number of sweeps used.
pub fn lasso_coordinate_descent(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    alpha: f64,
    max_sweeps: usize,
    tol: f64,
) -> (Array1<f64>, usize) {
    let (n, d) = x.dim();
    let nf = n as f64;
    let col_sq: Vec<f64> = (0..d).map(|j| x.column(j).dot(&x.column(j)) / nf).collect();
    let mut w = Array1::<f64>::zeros(d);
    let mut residual = y.to_owned();
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        let mut max_w = 0.0f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = x.column(j);
            let old = w[j];
            let rho = col.dot(&residual) / nf + col_sq[j] * old;
            let new = soft_threshold(rho, alpha) / col_sq[j];
            if new != old {
                residual.scaled_add(old - new, &col);
                w[j] = new;
            }
            max_delta = max_delta.max((new - old).abs());
            max_w = max_w.max(new.abs());
        }
        if max_delta <= tol * max_w.max(1.0) {
            break;
        }
    }
    (w, sweeps)
}

#[derive(Debug, Clone)]
struct Standardizer {
    mean: Array1<f64>,
    scale: Array1<f64>,
}

impl Standardizer {
    fn fit(x: ArrayView2<'_, f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x.var_axis(Axis(0), 0.0).mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Standardizer { mean, scale }
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean) / &self.scale
    }
}

/// R² = 1 - SS_res / SS_tot, or `None` when the target is constant.
pub fn r_squared(y: ArrayView1<'_, f64>, pred: ArrayView1<'_, f64>) -> Option<f64> {
    let mean = y.mean()?;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = y.iter().zip(pred.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

/// Fits all three channels on (x, y); returns weights in raw feature units.
fn fit_channels(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, params: &LmapParams) -> MappingWeights {
    let std = Standardizer::fit(x);
    let xs = std.apply(x);
    let d = x.ncols();
    let mut weights = Array2::zeros((d, 3));
    let mut intercept = [0.0; 3];
    for c in 0..3 {
        let target = y.column(c);
        let y_mean = target.mean().expect("non-empty");
        let centered = target.mapv(|v| v - y_mean);
        let (w_std, _) =
            lasso_coordinate_descent(xs.view(), centered.view(), params.alpha, params.max_sweeps, params.tol);
        let w_raw = &w_std / &std.scale;
        intercept[c] = y_mean - w_raw.dot(&std.mean);
        weights.column_mut(c).assign(&w_raw);
    }
    MappingWeights {
        weights,
        intercept,
        alpha: params.alpha,
    }
}

/// Shuffled k-fold split: fold of each row index.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % folds;
    }
    fold_of
}

fn select_rows(m: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

/// Cross-validated linear mapping `x` (n × d) → `y` (n × 3).
pub fn cross_validate(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, params: &LmapParams) -> Result<LmapFit> {
    let n = x.nrows();
    if y.nrows() != n || y.ncols() != 3 {
        return Err(Error::Argument(format!(
            "expected y of shape ({n}, 3), got {:?}",
            y.dim()
        )));
    }
    if params.folds < 2 || n < params.folds {
        return Err(Error::Argument(format!(
            "need n >= folds >= 2, got n={n}, folds={}",
            params.folds
        )));
    }
    if !(params.alpha >= 0.0 && params.alpha.is_finite()) {
        return Err(Error::Argument(format!("alpha must be >= 0, got {}", params.alpha)));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("lmap inputs must be finite".into()));
    }

    let mut flagged = Vec::new();
    for (c, name) in CHANNELS.iter().enumerate() {
        let col = y.column(c);
        let first = col[0];
        if col.iter().all(|v| *v == first) {
            flagged.push(*name);
        }
    }

    let fold_of = fold_assignment(n, params.folds, params.seed);
    let mut held_out = Vec::with_capacity(params.folds);
    let mut train = Vec::with_capacity(params.folds);
    for fold in 0..params.folds {
        let test_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        let train_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let x_train = select_rows(x, &train_rows);
        let y_train = select_rows(y, &train_rows);
        let x_test = select_rows(x, &test_rows);
        let y_test = select_rows(y, &test_rows);

        let mapping = fit_channels(x_train.view(), y_train.view(), params);
        let pred_test = mapping.predict(x_test.view());
        let pred_train = mapping.predict(x_train.view());
        let mut fold_test = [0.0; 3];
        let mut fold_train = [0.0; 3];
        for c in 0..3 {
            fold_test[c] = r_squared(y_test.column(c), pred_test.column(c)).unwrap_or(0.0);
            fold_train[c] = r_squared(y_train.column(c), pred_train.column(c)).unwrap_or(0.0);
        }
        held_out.push(fold_test);
        train.push(fold_train);
    }

    let mapping = fit_channels(x, y, params);
    Ok(LmapFit {
        mapping,
        score: mean_grid(&held_out),
        held_out,
        train,
        flagged_channels: flagged,
    })
}

/// Held-out R² of an already fitted mapping.
pub fn score_mapping(mapping: &MappingWeights, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> [Option<f64>; 3] {
    let pred = mapping.predict(x);
    [0, 1, 2].map(|c| r_squared(y.column(c), pred.column(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn ols_limit_recovers_exact_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 40, 3);
        let w_true = array![1.5, -2.0, 0.25];
        let y = x.dot(&w_true);
        let (w, _) = lasso_coordinate_descent(x.view(), y.view(), 0.0, 100_000, 1e-14);
        for j in 0..3 {
            assert!((w[j] - w_true[j]).abs() < 1e-9, "{w:?}");
        }
    }

    #[test]
    fn large_alpha_zeroes_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_matrix(&mut rng, 30, 5);
        let y = x.column(0).to_owned();
        let (w, _) = lasso_coordinate_descent(x.view(), y.view(), 1e3, 100, 1e-12);
        assert!(w.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sparsity_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(&mut rng, 100, 20);
        let y = random_matrix(&mut rng, 100, 3);
        let fit = cross_validate(x.view(), y.view(), &LmapParams { alpha: 0.05, ..Default::default() }).unwrap();
        assert!(fit.mapping.zero_fraction() > 0.0);
        assert!(fit.mapping.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn argument_errors() {
        let x = Array2::<f64>::zeros((3, 2));
        let y = Array2::<f64>::zeros((3, 3));
        assert!(cross_validate(x.view(), y.view(), &LmapParams { folds: 5, ..Default::default() }).is_err());
        assert!(cross_validate(x.view(), y.view(), &LmapParams { folds: 1, ..Default::default() }).is_err());
        assert!(cross_validate(x.view(), y.view(), &LmapParams { alpha: -1.0, folds: 2, ..Default::default() }).is_err());
    }

    #[test]
    fn constant_channel_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_matrix(&mut rng, 30, 4);
        let mut y = Array2::zeros((30, 3));
        y.column_mut(0).assign(&x.column(0));
        y.column_mut(1).assign(&x.column(1));
        y.column_mut(2).fill(50.0);
        let fit = cross_validate(x.view(), y.view(), &LmapParams { alpha: 1e-6, folds: 3, ..Default::default() }).unwrap();
        assert_eq!(fit.flagged_channels, vec!["b"]);
        assert!(fit.held_out.iter().all(|f| f[2] == 0.0));
        assert!(fit.held_out.iter().all(|f| f[0] > 0.999));
    }

    #[test]
    fn folds_partition_rows() {
        let f = fold_assignment(23, 5, 9);
        for k in 0..5 {
            let size = f.iter().filter(|&&v| v == k).count();
            assert!(size == 4 || size == 5);
        }
        assert_eq!(f, fold_assignment(23, 5, 9));
    }

    #[test]
    fn recovers_intercept_in_raw_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 60, 3) * 10.0 + 5.0;
        let mut y = Array2::zeros((60, 3));
        for i in 0..60 {
            y[[i, 0]] = 2.0 * x[[i, 0]] + 7.0;
            y[[i, 1]] = -x[[i, 1]] - 3.0;
            y[[i, 2]] = 0.5 * x[[i, 2]];
        }
        let fit = cross_validate(x.view(), y.view(), &LmapParams { alpha: 0.0, folds: 3, ..Default::default() }).unwrap();
        assert!((fit.mapping.intercept[0] - 7.0).abs() < 1e-6);
        assert!((fit.mapping.weights[[0, 0]] - 2.0).abs() < 1e-8);
        assert!((fit.mapping.intercept[1] + 3.0).abs() < 1e-6);
        let r2 = score_mapping(&fit.mapping, x.view(), y.view());
        assert!(r2.iter().all(|v| v.unwrap() > 1.0 - 1e-10));
    }
}
