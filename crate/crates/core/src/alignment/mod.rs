//! Inter-space alignment estimators between description embeddings and
//! CIELAB colors: linear mapping, RSA and Gromov-Wasserstein, plus k-means
//! for grouping.

pub mod gw;
pub mod kmeans;
pub mod lmap;
pub mod rsa;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{join, ColorMatrix, ColorPair, CorpusSlice, EmbeddingMatrix, Provenance};
use crate::error::{Error, Result};

pub use gw::{Coupling, EpsilonSchedule, GwParams, GwSolution, Start};
pub use kmeans::{kmeans, KMeansResult};
pub use lmap::{LmapFit, LmapParams, MappingWeights};
pub use rsa::{SimilarityKind, SimilarityMatrix};

/// Slices smaller than this are reported without a score.
pub const DEFAULT_SLICE_FLOOR: usize = 20;
/// Marginal tolerance checked on every coupling.
pub const MARGINAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lmap,
    Rsa,
    Gw,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lmap, Method::Rsa, Method::Gw];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lmap => "lmap",
            Method::Rsa => "rsa",
            Method::Gw => "gw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lmap" => Ok(Method::Lmap),
            "rsa" => Ok(Method::Rsa),
            "gw" | "ot" => Ok(Method::Gw),
            other => Err(Error::Argument(format!("unknown alignment method {other:?}"))),
        }
    }
}

/// A named value in a report; `None` serializes as `null` for undefined values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detail {
    pub name: String,
    pub value: Option<f64>,
}

impl Detail {
    fn new(name: impl Into<String>, value: f64) -> Self {
        Detail {
            name: name.into(),
            value: value.is_finite().then_some(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub method: Method,
    pub slice: String,
    /// Absent when the slice was skipped.
    pub score: Option<f64>,
    pub n: usize,
    pub params: serde_json::Value,
    pub detail: Vec<Detail>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub checks: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl AlignmentReport {
    fn new(method: Method, slice: &str, n: usize, params: serde_json::Value) -> Self {
        AlignmentReport {
            method,
            slice: slice.to_owned(),
            score: None,
            n,
            params,
            detail: Vec::new(),
            checks: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn detail(&self, name: &str) -> Option<f64> {
        self.detail.iter().find(|d| d.name == name).and_then(|d| d.value)
    }
}

fn check_aligned(x: &EmbeddingMatrix, y: &ColorMatrix) -> Result<()> {
    if x.ids() != y.ids() {
        return Err(Error::Argument("embedding and color matrices are not id-aligned".into()));
    }
    Ok(())
}

/// Drops rows with a zero vector on either side. Returns the kept arrays,
/// their ids and the excluded ids.
fn nonzero_rows(x: &EmbeddingMatrix, y: &ColorMatrix) -> (Array2<f64>, Array2<f64>, Vec<String>, Vec<String>) {
    let xa = x.to_array();
    let ya = y.to_array();
    let excluded = rsa::zero_norm_rows(xa.view(), ya.view());
    if excluded.is_empty() {
        return (xa, ya, x.ids().to_vec(), Vec::new());
    }
    let keep: Vec<usize> = (0..x.len()).filter(|i| !excluded.contains(i)).collect();
    let kept_ids = keep.iter().map(|&i| x.ids()[i].clone()).collect();
    let excluded_ids = excluded.iter().map(|&i| x.ids()[i].clone()).collect();
    (xa.select(Axis(0), &keep), ya.select(Axis(0), &keep), kept_ids, excluded_ids)
}

/// Cross-validated Lasso mapping from embeddings to Lab.
pub fn fit_lmap(
    x: &EmbeddingMatrix,
    y: &ColorMatrix,
    params: &LmapParams,
    slice: &str,
) -> Result<(MappingWeights, AlignmentReport)> {
    check_aligned(x, y)?;
    let fit = lmap::cross_validate(x.to_array().view(), y.to_array().view(), params)?;
    let mut report = AlignmentReport::new(
        Method::Lmap,
        slice,
        x.len(),
        serde_json::to_value(params).expect("params serialize"),
    );
    report.score = Some(fit.score);
    for (fold, (test, train)) in fit.held_out.iter().zip(&fit.train).enumerate() {
        for (c, name) in lmap::CHANNELS.iter().enumerate() {
            report.detail.push(Detail::new(format!("fold{fold}.{name}.held_out_r2"), test[c]));
            report.detail.push(Detail::new(format!("fold{fold}.{name}.train_r2"), train[c]));
        }
    }
    report.detail.push(Detail::new("mean_train_r2", fit.mean_train_r2()));
    report.detail.push(Detail::new("zero_weight_fraction", fit.mapping.zero_fraction()));
    for channel in &fit.flagged_channels {
        report
            .warnings
            .push(format!("channel {channel} has zero variance; its R² is defined as 0"));
    }
    Ok((fit.mapping, report))
}

/// Mean row-wise Kendall τ-b between cosine similarity matrices.
pub fn rsa(x: &EmbeddingMatrix, y: &ColorMatrix, slice: &str) -> Result<AlignmentReport> {
    check_aligned(x, y)?;
    let (xa, ya, ids, excluded) = nonzero_rows(x, y);
    let text = SimilarityMatrix::cosine(xa.view(), SimilarityKind::Text)?;
    let color = SimilarityMatrix::cosine(ya.view(), SimilarityKind::Color)?;
    let scores = rsa::compare_similarities(&text, &color)?;
    let mut report = AlignmentReport::new(
        Method::Rsa,
        slice,
        ids.len(),
        serde_json::json!({ "aggregation": "row_mean", "variant": "tau_b" }),
    );
    report.score = scores.mean_row_tau.is_finite().then_some(scores.mean_row_tau);
    report.detail.push(Detail::new("flattened_tau_b", scores.flattened_tau.unwrap_or(f64::NAN)));
    report.detail.push(Detail::new("excluded_zero_norm_rows", excluded.len() as f64));
    let undefined = scores.per_row.iter().filter(|t| t.is_none()).count();
    report.detail.push(Detail::new("undefined_rows", undefined as f64));
    for (id, tau) in ids.iter().zip(&scores.per_row) {
        report.detail.push(Detail {
            name: format!("row.{id}"),
            value: *tau,
        });
    }
    if !excluded.is_empty() {
        report
            .warnings
            .push(format!("excluded zero-norm rows: {}", excluded.join(", ")));
    }
    Ok(report)
}

/// Entropic GW between cosine similarity structures; the headline score is
/// the fraction of rows whose transport argmax is their own partner.
pub fn gw_align(
    x: &EmbeddingMatrix,
    y: &ColorMatrix,
    params: &GwParams,
    slice: &str,
) -> Result<(Coupling, AlignmentReport)> {
    check_aligned(x, y)?;
    let (xa, ya, ids, excluded) = nonzero_rows(x, y);
    let solution = gw::align_points(xa.view(), ya.view(), params)?;
    let mut report = AlignmentReport::new(
        Method::Gw,
        slice,
        ids.len(),
        serde_json::to_value(params).expect("params serialize"),
    );
    let (row_err, col_err) = solution.coupling.marginal_errors();
    report.score = Some(solution.matching_accuracy);
    report.detail.push(Detail::new("gw_cost", solution.cost));
    report.detail.push(Detail::new("matching_accuracy", solution.matching_accuracy));
    report.detail.push(Detail::new("outer_iterations", solution.outer_iterations as f64));
    report.detail.push(Detail::new("sinkhorn_iterations", solution.sinkhorn_iterations as f64));
    report.detail.push(Detail::new("starts_tried", solution.starts_tried as f64));
    report.detail.push(Detail::new("log_domain_solves", solution.log_domain_solves as f64));
    report.detail.push(Detail::new("max_row_marginal_error", row_err));
    report.detail.push(Detail::new("max_col_marginal_error", col_err));
    report.detail.push(Detail::new("excluded_zero_norm_rows", excluded.len() as f64));
    report.detail.push(Detail::new("winning_start", solution.start.index() as f64));
    let marginals_ok = row_err <= MARGINAL_TOLERANCE && col_err <= MARGINAL_TOLERANCE;
    report.checks.insert("marginals".into(), marginals_ok);
    report.checks.insert("converged".into(), solution.converged);
    if !solution.converged {
        report.warnings.push(format!(
            "outer loop stopped at max_outer={} before reaching tol={}",
            params.max_outer, params.tol
        ));
    }
    Ok((solution.coupling, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    pub lmap: LmapParams,
    pub gw: GwParams,
    pub floor: usize,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            lmap: LmapParams::default(),
            gw: GwParams::default(),
            floor: DEFAULT_SLICE_FLOOR,
        }
    }
}

/// Runs one estimator on a pre-joined pair of matrices.
pub fn run_method(
    method: Method,
    x: &EmbeddingMatrix,
    y: &ColorMatrix,
    params: &AlignParams,
    slice: &str,
) -> Result<AlignmentReport> {
    match method {
        Method::Lmap => fit_lmap(x, y, &params.lmap, slice).map(|(_, r)| r),
        Method::Rsa => rsa(x, y, slice),
        Method::Gw => gw_align(x, y, &params.gw, slice).map(|(_, r)| r),
    }
}

/// Runs `method` independently on every slice, in slice order. Slices with
/// fewer than `params.floor` joined rows get a warning report and no score.
pub fn align_slices(
    pairs: &[ColorPair],
    emb: &EmbeddingMatrix,
    slices: &[CorpusSlice],
    method: Method,
    params: &AlignParams,
) -> Result<Vec<AlignmentReport>> {
    slices
        .par_iter()
        .map(|slice| {
            let sub = emb.subset(&slice.member_ids);
            if sub.len() < params.floor.max(1) {
                let mut report = AlignmentReport::new(method, &slice.name, sub.len(), serde_json::Value::Null);
                report.warnings.push(format!(
                    "slice has {} rows, below the floor of {}; skipped",
                    sub.len(),
                    params.floor
                ));
                return Ok(report);
            }
            let (x, y) = join(pairs, &sub)?;
            run_method(method, &x, &y, params, &slice.name)
        })
        .collect()
}

/// Runs k-means on `points` (one row per id) and turns each cluster into a
/// slice named `{space}_k{k}_c{index}`, prefixed by `parent.` when nested.
pub fn cluster_slices(
    ids: &[String],
    points: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    space: &str,
    parent: Option<&str>,
) -> Result<(Vec<CorpusSlice>, KMeansResult)> {
    if ids.len() != points.nrows() {
        return Err(Error::Argument(format!(
            "{} ids for {} points",
            ids.len(),
            points.nrows()
        )));
    }
    let result = kmeans(points, k, seed)?;
    let mut slices: Vec<CorpusSlice> = (0..k)
        .map(|index| {
            let base = format!("{space}_k{k}_c{index}");
            CorpusSlice {
                name: match parent {
                    Some(p) => format!("{p}.{base}"),
                    None => base,
                },
                member_ids: Default::default(),
                provenance: Provenance::Cluster {
                    space: space.to_owned(),
                    k,
                    index,
                    seed,
                    parent: parent.map(str::to_owned),
                },
            }
        })
        .collect();
    for (id, &c) in ids.iter().zip(&result.assignments) {
        slices[c].member_ids.insert(id.clone());
    }
    Ok((slices, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::Srgb;
    use crate::data::Provenance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(n: usize, seed: u64) -> (Vec<ColorPair>, EmbeddingMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::new();
        let mut rows = Vec::new();
        for i in 0..n {
            let c = Srgb::new(rng.random(), rng.random(), rng.random());
            pairs.push(ColorPair::new(format!("p{i:03}"), c, "some color").unwrap());
            let lab = c.to_lab();
            rows.push(vec![lab.l as f32, lab.a as f32, lab.b as f32, rng.random_range(-1.0..1.0)]);
        }
        let ids = pairs.iter().map(|p| p.id.clone()).collect();
        (pairs, EmbeddingMatrix::from_rows(ids, &rows).unwrap())
    }

    fn slice(name: &str, ids: impl Iterator<Item = String>) -> CorpusSlice {
        CorpusSlice {
            name: name.into(),
            member_ids: ids.collect(),
            provenance: Provenance::Filter { name: name.into() },
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("RSA".parse::<Method>().unwrap(), Method::Rsa);
        assert!("procrustes".parse::<Method>().is_err());
    }

    #[test]
    fn fan_out_keeps_slice_names_and_order() {
        let (pairs, emb) = corpus(60, 1);
        let slices = vec![
            slice("first", (0..30).map(|i| format!("p{i:03}"))),
            slice("second", (30..60).map(|i| format!("p{i:03}"))),
        ];
        let reports = align_slices(&pairs, &emb, &slices, Method::Rsa, &AlignParams::default()).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].slice, "first");
        assert_eq!(reports[1].slice, "second");
        assert!(reports.iter().all(|r| r.score.is_some()));
    }

    #[test]
    fn small_slice_gets_warning() {
        let (pairs, emb) = corpus(30, 2);
        let slices = vec![slice("tiny", (0..3).map(|i| format!("p{i:03}")))];
        let reports = align_slices(&pairs, &emb, &slices, Method::Lmap, &AlignParams::default()).unwrap();
        assert_eq!(reports[0].score, None);
        assert_eq!(reports[0].n, 3);
        assert!(reports[0].warnings[0].contains("floor"));
    }

    #[test]
    fn identical_slices_score_identically() {
        let (pairs, emb) = corpus(40, 3);
        let all: Vec<String> = emb.ids().to_vec();
        let slices = vec![slice("a", all.clone().into_iter()), slice("b", all.into_iter())];
        for method in Method::ALL {
            let r = align_slices(&pairs, &emb, &slices, method, &AlignParams::default()).unwrap();
            assert_eq!(r[0].score, r[1].score, "{method}");
            assert_eq!(r[0].detail, r[1].detail);
        }
    }

    #[test]
    fn rsa_excludes_zero_rows() {
        let (pairs, emb) = corpus(10, 4);
        let mut rows: Vec<Vec<f32>> = (0..10).map(|i| emb.row(i).to_vec()).collect();
        rows[3] = vec![0.0; 4];
        let emb = EmbeddingMatrix::from_rows(emb.ids().to_vec(), &rows).unwrap();
        let (x, y) = join(&pairs, &emb).unwrap();
        let report = rsa(&x, &y, "all").unwrap();
        assert_eq!(report.n, 9);
        assert_eq!(report.detail("excluded_zero_norm_rows"), Some(1.0));
        assert!(report.warnings[0].contains("p003"));
    }

    #[test]
    fn misaligned_ids_are_rejected() {
        let (pairs, emb) = corpus(5, 5);
        let (x, _) = join(&pairs, &emb).unwrap();
        let y = ColorMatrix::new(
            x.ids().iter().rev().cloned().collect(),
            vec![[50.0, 0.0, 0.0]; 5],
        )
        .unwrap();
        assert!(rsa(&x, &y, "s").is_err());
    }

    #[test]
    fn report_json_shape() {
        let (pairs, emb) = corpus(25, 6);
        let (x, y) = join(&pairs, &emb).unwrap();
        let (_, report) = gw_align(&x, &y, &GwParams::default(), "all").unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["method", "slice", "score", "n", "params", "detail"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["method"], "gw");
        assert_eq!(report.checks.get("marginals"), Some(&true));
    }
}
