//! Comparative grounding and the masked-comparative probe.
//!
//! Pairs of descriptions are matched against (reference points, comparative,
//! target points) tuples by perceptual distance, turned into K-shot masked
//! prompts, and model rankings for those prompts are scored by MRR.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::colorspace::{delta_e, LabPoint};
use crate::data::ColorPair;
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const DEFAULT_TEMPLATE: &str = "{left} is {comparative} than {right}";
pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_PROMPT_COUNT: usize = 1000;

pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_uppercase()
}

/// (reference points, comparative, target points).
#[derive(Debug, Clone, PartialEq)]
pub struct ComparativeTuple {
    comparative: String,
    pub reference: Vec<LabPoint>,
    pub target: Vec<LabPoint>,
}

#[derive(Serialize, Deserialize)]
struct TupleWire {
    comparative: String,
    reference: Vec<[f64; 3]>,
    target: Vec<[f64; 3]>,
}

impl ComparativeTuple {
    pub fn new(comparative: &str, reference: Vec<LabPoint>, target: Vec<LabPoint>) -> Result<Self> {
        let comparative = normalize_label(comparative);
        if comparative.is_empty() {
            return Err(Error::Validation("comparative label is empty".into()));
        }
        if reference.is_empty() || target.is_empty() {
            return Err(Error::Validation(format!(
                "tuple {comparative}: reference and target must be non-empty"
            )));
        }
        if reference.iter().chain(&target).any(|p| !p.is_finite()) {
            return Err(Error::Validation(format!("tuple {comparative}: non-finite point")));
        }
        Ok(ComparativeTuple {
            comparative,
            reference,
            target,
        })
    }

    pub fn comparative(&self) -> &str {
        &self.comparative
    }

    /// Same label with reference and target exchanged.
    pub fn swapped(&self) -> Self {
        ComparativeTuple {
            comparative: self.comparative.clone(),
            reference: self.target.clone(),
            target: self.reference.clone(),
        }
    }

    /// Mean distance from the reference points to `left` plus mean distance
    /// from the target points to `right`.
    pub fn cost(&self, left: &LabPoint, right: &LabPoint) -> f64 {
        mean_distance(&self.reference, left) + mean_distance(&self.target, right)
    }

    pub fn to_json_line(&self) -> String {
        let wire = TupleWire {
            comparative: self.comparative.clone(),
            reference: self.reference.iter().map(|p| p.to_array()).collect(),
            target: self.target.iter().map(|p| p.to_array()).collect(),
        };
        serde_json::to_string(&wire).expect("tuple serializes")
    }
}

fn mean_distance(points: &[LabPoint], to: &LabPoint) -> f64 {
    points.iter().map(|p| delta_e(p, to)).sum::<f64>() / points.len() as f64
}

fn parse_jsonl<T, F>(text: &str, what: &str, mut f: F) -> Result<Vec<T>>
where
    F: FnMut(&str) -> std::result::Result<T, String>,
{
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(f(line).map_err(|message| Error::Row {
            line: idx + 1,
            message: format!("{what}: {message}"),
        })?);
    }
    Ok(out)
}

pub fn parse_tuples(text: &str) -> Result<Vec<ComparativeTuple>> {
    parse_jsonl(text, "comparative tuple", |line| {
        let wire: TupleWire = serde_json::from_str(line).map_err(|e| e.to_string())?;
        ComparativeTuple::new(
            &wire.comparative,
            wire.reference.into_iter().map(LabPoint::from).collect(),
            wire.target.into_iter().map(LabPoint::from).collect(),
        )
        .map_err(|e| e.to_string())
    })
}

/// Distinct labels, sorted.
pub fn vocabulary(tuples: &[ComparativeTuple]) -> Vec<String> {
    tuples
        .iter()
        .map(|t| t.comparative.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedComparative {
    pub comparative: String,
    pub cost: f64,
}

/// A description pair with its grounded comparative ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pair_id: String,
    pub left_id: String,
    pub right_id: String,
    /// Ascending cost; ties broken by label.
    pub ranking: Vec<RankedComparative>,
    pub gold: String,
}

pub fn pair_id(left: &str, right: &str) -> String {
    format!("{left}~{right}")
}

/// Ranks every distinct comparative for (left, right). A label's cost is
/// the minimum over its tuples.
pub fn match_pair(left: &ColorPair, right: &ColorPair, tuples: &[ComparativeTuple]) -> Result<MatchedPair> {
    if tuples.is_empty() {
        return Err(Error::Argument("no comparative tuples to match against".into()));
    }
    let (l, r) = (left.lab(), right.lab());
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for t in tuples {
        let c = t.cost(&l, &r);
        best.entry(t.comparative.as_str())
            .and_modify(|v| *v = v.min(c))
            .or_insert(c);
    }
    let mut ranking: Vec<RankedComparative> = best
        .into_iter()
        .map(|(label, cost)| RankedComparative {
            comparative: label.to_owned(),
            cost,
        })
        .collect();
    // BTreeMap iteration is label-ordered, so a stable sort breaks ties by label.
    ranking.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    Ok(MatchedPair {
        pair_id: pair_id(&left.id, &right.id),
        left_id: left.id.clone(),
        right_id: right.id.clone(),
        gold: ranking[0].comparative.clone(),
        ranking,
    })
}

/// Samples `count` ordered pairs of distinct corpus entries and matches each.
pub fn match_sampled_pairs(
    pairs: &[ColorPair],
    tuples: &[ComparativeTuple],
    count: usize,
    seed: u64,
) -> Result<Vec<MatchedPair>> {
    use rayon::prelude::*;

    if pairs.len() < 2 {
        return Err(Error::Argument("need at least two pairs to match".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let max_distinct = pairs.len() * (pairs.len() - 1);
    let mut chosen = Vec::with_capacity(count.min(max_distinct));
    while chosen.len() < count.min(max_distinct) {
        let idx = index::sample(&mut rng, pairs.len(), 2);
        let (i, j) = (idx.index(0), idx.index(1));
        if seen.insert((i, j)) {
            chosen.push((i, j));
        }
    }
    chosen
        .par_iter()
        .map(|&(i, j)| match_pair(&pairs[i], &pairs[j], tuples))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub k: usize,
    pub count: usize,
    pub seed: u64,
    pub template: String,
    pub mask_token: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            k: DEFAULT_K,
            count: DEFAULT_PROMPT_COUNT,
            seed: 0,
            template: DEFAULT_TEMPLATE.to_owned(),
            mask_token: DEFAULT_MASK_TOKEN.to_owned(),
        }
    }
}

/// K-1 demonstrations plus one masked query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub prompt_id: String,
    pub shots: Vec<String>,
    pub query: String,
    pub mask_token: String,
    pub gold: String,
    pub candidates: Vec<String>,
    pub k: usize,
    pub query_pair_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<String>,
}

impl PromptSet {
    /// The prompt text handed to a model: shots then query, one per line.
    pub fn text(&self) -> String {
        let mut out = self.shots.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&self.query);
        out
    }
}

fn fill(template: &str, left: &str, comparative: &str, right: &str) -> String {
    template
        .replace("{left}", left)
        .replace("{right}", right)
        .replace("{comparative}", comparative)
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Builds `config.count` prompt sets, each from K matched pairs drawn
/// without replacement. A pair whose descriptions contain the mask token is
/// never used; a pair whose query would spell out its own gold label is
/// never used as the query.
pub fn build_prompts(
    matched: &[MatchedPair],
    pairs: &[ColorPair],
    candidates: &[String],
    config: &PromptConfig,
    slice: Option<&str>,
) -> Result<Vec<PromptSet>> {
    let k = config.k;
    if k < 2 {
        return Err(Error::Argument(format!("K must be at least 2, got {k}")));
    }
    if config.template.matches("{comparative}").count() != 1 {
        return Err(Error::Argument("template must contain {comparative} exactly once".into()));
    }
    if config.mask_token.trim().is_empty() {
        return Err(Error::Argument("mask token is empty".into()));
    }
    let descriptions: HashMap<&str, &str> = pairs.iter().map(|p| (p.id.as_str(), p.description.as_str())).collect();
    let describe = |id: &str| -> Result<&str> {
        descriptions
            .get(id)
            .copied()
            .ok_or_else(|| Error::Validation(format!("matched pair refers to unknown id {id:?}")))
    };

    let mut usable = Vec::new();
    for m in matched {
        let (l, r) = (describe(&m.left_id)?, describe(&m.right_id)?);
        if !l.contains(&config.mask_token) && !r.contains(&config.mask_token) {
            usable.push(m);
        }
    }
    if usable.len() < k {
        return Err(Error::Argument(format!(
            "need at least K={k} matched pairs, have {}",
            usable.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prefix = slice.map(|s| format!("{s}:")).unwrap_or_default();
    let mut out = Vec::with_capacity(config.count);
    for p in 0..config.count {
        let mut attempt = 0;
        let (shots, query, query_pair) = loop {
            attempt += 1;
            let picks: Vec<&MatchedPair> = index::sample(&mut rng, usable.len(), k).into_iter().map(|i| usable[i]).collect();
            let masked = |m: &MatchedPair| -> Result<Option<String>> {
                let q = fill(&config.template, describe(&m.left_id)?, &config.mask_token, describe(&m.right_id)?);
                let leaks = contains_phrase(&tokenize(&q), &tokenize(&m.gold));
                Ok((!leaks && q.matches(&config.mask_token).count() == 1).then_some(q))
            };
            let mut found = None;
            for qi in (0..k).rev() {
                if let Some(q) = masked(picks[qi])? {
                    found = Some((qi, q));
                    break;
                }
            }
            if let Some((qi, q)) = found {
                let shots = picks
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != qi)
                    .map(|(_, m)| {
                        Ok(fill(
                            &config.template,
                            describe(&m.left_id)?,
                            &m.gold.to_lowercase(),
                            describe(&m.right_id)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                break (shots, q, picks[qi]);
            }
            if attempt >= 100 {
                return Err(Error::Validation(
                    "could not find a query pair that does not spell out its gold label".into(),
                ));
            }
        };
        out.push(PromptSet {
            prompt_id: format!("{prefix}{p:06}"),
            shots,
            query,
            mask_token: config.mask_token.clone(),
            gold: query_pair.gold.clone(),
            candidates: candidates.to_vec(),
            k,
            query_pair_id: query_pair.pair_id.clone(),
            slice: slice.map(str::to_owned),
        });
    }
    Ok(out)
}

/// A model's ranking of comparative labels for one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub prompt_id: String,
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrrSummary {
    pub mrr: f64,
    /// Prompts with a prediction.
    pub n: usize,
    /// Predictions whose ranking lacks the gold label.
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptOutcome {
    pub prompt_id: String,
    pub query_pair_id: String,
    /// 1-based rank of the gold label, if ranked.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrrReport {
    pub overall: MrrSummary,
    /// Prompts that received no prediction; excluded from the mean.
    pub unanswered: usize,
    pub per_slice: BTreeMap<String, MrrSummary>,
    pub outcomes: Vec<PromptOutcome>,
}

impl MrrReport {
    /// Prompt id to pair id, for prompts whose gold label was ranked first.
    pub fn correct(&self) -> BTreeMap<String, String> {
        self.outcomes
            .iter()
            .filter(|o| o.rank == Some(1))
            .map(|o| (o.prompt_id.clone(), o.query_pair_id.clone()))
            .collect()
    }
}

fn summarize<'a>(ranks: impl Iterator<Item = &'a Option<usize>>) -> MrrSummary {
    let mut total = 0.0;
    let mut n = 0;
    let mut missing = 0;
    for r in ranks {
        n += 1;
        match r {
            Some(rank) => total += 1.0 / *rank as f64,
            None => missing += 1,
        }
    }
    MrrSummary {
        mrr: if n == 0 { 0.0 } else { total / n as f64 },
        n,
        missing,
    }
}

/// Mean reciprocal rank of the gold label, overall and per slice.
pub fn eval_mrr(prompts: &[PromptSet], preds: &[PredictionRecord]) -> Result<MrrReport> {
    let by_id: HashMap<&str, &PromptSet> = prompts.iter().map(|p| (p.prompt_id.as_str(), p)).collect();
    if by_id.len() != prompts.len() {
        return Err(Error::Validation("duplicate prompt_id among prompts".into()));
    }
    let mut pred_by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for pred in preds {
        let prompt = by_id
            .get(pred.prompt_id.as_str())
            .ok_or_else(|| Error::Validation(format!("prediction for unknown prompt {:?}", pred.prompt_id)))?;
        if pred_by_id.insert(pred.prompt_id.as_str(), pred).is_some() {
            return Err(Error::Validation(format!("duplicate prediction for prompt {:?}", pred.prompt_id)));
        }
        let mut seen = HashSet::new();
        for label in &pred.ranking {
            if !seen.insert(label.as_str()) {
                return Err(Error::Validation(format!(
                    "prompt {:?}: label {label:?} ranked twice",
                    pred.prompt_id
                )));
            }
            if !prompt.candidates.is_empty() && !prompt.candidates.iter().any(|c| c == label) {
                return Err(Error::Validation(format!(
                    "prompt {:?}: label {label:?} is not a candidate",
                    pred.prompt_id
                )));
            }
        }
    }

    let mut outcomes = Vec::new();
    let mut slice_ranks: BTreeMap<String, Vec<Option<usize>>> = BTreeMap::new();
    let mut unanswered = 0;
    for prompt in prompts {
        let Some(pred) = pred_by_id.get(prompt.prompt_id.as_str()) else {
            unanswered += 1;
            continue;
        };
        let rank = pred.ranking.iter().position(|l| *l == prompt.gold).map(|p| p + 1);
        if let Some(slice) = &prompt.slice {
            slice_ranks.entry(slice.clone()).or_default().push(rank);
        }
        outcomes.push(PromptOutcome {
            prompt_id: prompt.prompt_id.clone(),
            query_pair_id: prompt.query_pair_id.clone(),
            rank,
        });
    }
    Ok(MrrReport {
        overall: summarize(outcomes.iter().map(|o| &o.rank)),
        unanswered,
        per_slice: slice_ranks.iter().map(|(k, v)| (k.clone(), summarize(v.iter()))).collect(),
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub label: String,
    pub hexcolor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: String,
    pub to: String,
    pub comparative: String,
    pub prompt_id: String,
}

/// Descriptions linked by correctly predicted comparatives.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComparativeGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    /// Correct prompts whose pair id was not among the matched pairs.
    pub unresolved: usize,
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl ComparativeGraph {
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph comparatives {\n  node [style=filled];\n");
        for n in &self.nodes {
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{}\", hexcolor=\"{}\", fillcolor=\"{}\"];",
                dot_escape(&n.id),
                dot_escape(&n.label),
                n.hexcolor,
                n.hexcolor
            );
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\", prompt=\"{}\"];",
                dot_escape(&e.from),
                dot_escape(&e.to),
                dot_escape(&e.comparative.to_lowercase()),
                dot_escape(&e.prompt_id)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Nodes are the descriptions of every matched pair; one edge per correct
/// prompt, from left to right, labeled with the gold comparative.
pub fn comparative_graph(
    matched: &[MatchedPair],
    pairs: &[ColorPair],
    correct: &BTreeMap<String, String>,
) -> ComparativeGraph {
    let by_id: HashMap<&str, &ColorPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut graph = ComparativeGraph::default();
    let mut seen = HashSet::new();
    for m in matched {
        for id in [&m.left_id, &m.right_id] {
            if seen.insert(id.as_str()) {
                if let Some(p) = by_id.get(id.as_str()) {
                    graph.nodes.push(GraphNode {
                        id: id.clone(),
                        label: p.description.clone(),
                        hexcolor: p.color.to_hex(),
                    });
                }
            }
        }
    }
    let by_pair: HashMap<&str, &MatchedPair> = matched.iter().map(|m| (m.pair_id.as_str(), m)).collect();
    for (prompt_id, pair_id) in correct {
        match by_pair.get(pair_id.as_str()) {
            Some(m) => graph.edges.push(GraphEdge {
                from: m.left_id.clone(),
                to: m.right_id.clone(),
                comparative: m.gold.clone(),
                prompt_id: prompt_id.clone(),
            }),
            None => graph.unresolved += 1,
        }
    }
    graph
}

pub fn parse_matched(text: &str) -> Result<Vec<MatchedPair>> {
    parse_jsonl(text, "matched pair", |l| serde_json::from_str(l).map_err(|e| e.to_string()))
}

pub fn parse_prompts(text: &str) -> Result<Vec<PromptSet>> {
    parse_jsonl(text, "prompt", |l| {
        let p: PromptSet = serde_json::from_str(l).map_err(|e| e.to_string())?;
        if p.query.matches(&p.mask_token).count() != 1 {
            return Err(format!("prompt {:?}: query must contain the mask token exactly once", p.prompt_id));
        }
        Ok(p)
    })
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>> {
    parse_jsonl(text, "prediction", |l| serde_json::from_str(l).map_err(|e| e.to_string()))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::Srgb;

    fn pair(id: &str, rgb: (u8, u8, u8), desc: &str) -> ColorPair {
        ColorPair::new(id, Srgb::new(rgb.0, rgb.1, rgb.2), desc).unwrap()
    }

    fn tuple(label: &str, r: [f64; 3], t: [f64; 3]) -> ComparativeTuple {
        ComparativeTuple::new(label, vec![r.into()], vec![t.into()]).unwrap()
    }

    #[test]
    fn zero_cost_tuple_ranks_first() {
        let left = pair("l", (200, 30, 30), "ripe red pepper");
        let right = pair("r", (90, 10, 10), "rotten meat red");
        let (ll, rl) = (left.lab().to_array(), right.lab().to_array());
        let tuples = vec![
            // two points centered on the left color: mean distance is the offset
            ComparativeTuple::new(
                "darker",
                vec![[ll[0] + 1.0, ll[1], ll[2]].into(), [ll[0] - 1.0, ll[1], ll[2]].into()],
                vec![rl.into()],
            )
            .unwrap(),
            tuple("LIGHTER", rl, ll),
            tuple("exact", ll, rl),
        ];
        let m = match_pair(&left, &right, &tuples).unwrap();
        assert_eq!(m.gold, "EXACT");
        assert_eq!(m.ranking[0].cost, 0.0);
        assert!(m.ranking[1].cost > 0.0);
        assert_eq!(m.ranking[1].comparative, "DARKER");
        assert_eq!(m.pair_id, "l~r");
    }

    #[test]
    fn equal_costs_fall_back_to_label_order() {
        let left = pair("l", (10, 20, 30), "a");
        let right = pair("r", (40, 50, 60), "b");
        let tuples = vec![
            tuple("zesty", [50.0, 0.0, 0.0], [60.0, 0.0, 0.0]),
            tuple("apt", [50.0, 0.0, 0.0], [60.0, 0.0, 0.0]),
        ];
        let m = match_pair(&left, &right, &tuples).unwrap();
        let labels: Vec<&str> = m.ranking.iter().map(|r| r.comparative.as_str()).collect();
        assert_eq!(labels, vec!["APT", "ZESTY"]);
    }

    #[test]
    fn label_cost_is_min_over_tuples() {
        let left = pair("l", (128, 128, 128), "grey");
        let right = pair("r", (128, 128, 128), "grey too");
        let lab = left.lab().to_array();
        let tuples = vec![tuple("same", [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]), tuple("same", lab, lab)];
        let m = match_pair(&left, &right, &tuples).unwrap();
        assert_eq!(m.ranking.len(), 1);
        assert_eq!(m.ranking[0].cost, 0.0);
        assert!(match_pair(&left, &right, &[]).is_err());
    }

    #[test]
    fn tuple_validation_and_wire_format() {
        assert!(ComparativeTuple::new("", vec![[0.0; 3].into()], vec![[0.0; 3].into()]).is_err());
        assert!(ComparativeTuple::new("x", vec![], vec![[0.0; 3].into()]).is_err());
        let t = tuple("more  vivid", [1.0, 2.0, 3.0], [4.0, 5.0, 6.0]);
        assert_eq!(t.comparative(), "MORE VIVID");
        let parsed = parse_tuples(&format!("{}\n\n", t.to_json_line())).unwrap();
        assert_eq!(parsed, vec![t]);
        assert!(matches!(parse_tuples("{\"comparative\": 3}").unwrap_err(), Error::Row { line: 1, .. }));
    }

    fn corpus(n: usize) -> (Vec<ColorPair>, Vec<MatchedPair>) {
        let pairs: Vec<ColorPair> = (0..n)
            .map(|i| pair(&format!("c{i}"), ((i * 7 % 256) as u8, (i * 13 % 256) as u8, 90), &format!("shade number {i}")))
            .collect();
        let tuples = vec![
            tuple("darker", [70.0, 0.0, 0.0], [30.0, 0.0, 0.0]),
            tuple("lighter", [30.0, 0.0, 0.0], [70.0, 0.0, 0.0]),
            tuple("more vivid", [50.0, 60.0, 0.0], [50.0, 10.0, 0.0]),
        ];
        let matched = match_sampled_pairs(&pairs, &tuples, n * 2, 3).unwrap();
        (pairs, matched)
    }

    fn labels() -> Vec<String> {
        vec!["DARKER".into(), "LIGHTER".into(), "MORE VIVID".into()]
    }

    #[test]
    fn prompt_shapes_and_determinism() {
        let (pairs, matched) = corpus(40);
        let config = PromptConfig { k: 2, count: 5, seed: 9, ..Default::default() };
        let prompts = build_prompts(&matched, &pairs, &labels(), &config, None).unwrap();
        assert_eq!(prompts.len(), 5);
        for p in &prompts {
            assert_eq!(p.shots.len(), 1);
            assert_eq!(p.query.matches("[MASK]").count(), 1);
            assert!(!p.shots[0].contains("[MASK]"));
            assert!(p.shots[0].contains(" is ") && p.shots[0].contains(" than "));
        }
        let again = build_prompts(&matched, &pairs, &labels(), &config, None).unwrap();
        assert_eq!(to_jsonl(&prompts), to_jsonl(&again));

        let config = PromptConfig { k: 10, count: 20, seed: 1, ..Default::default() };
        let prompts = build_prompts(&matched, &pairs, &labels(), &config, Some("bin0")).unwrap();
        assert!(prompts.iter().all(|p| p.shots.len() == 9 && p.k == 10));
        assert!(prompts[0].prompt_id.starts_with("bin0:"));
        assert!(prompts.iter().all(|p| p.text().lines().count() == 10));
    }

    #[test]
    fn shots_use_lowercase_gold() {
        let (pairs, matched) = corpus(20);
        let config = PromptConfig { k: 3, count: 3, seed: 2, ..Default::default() };
        for p in build_prompts(&matched, &pairs, &labels(), &config, None).unwrap() {
            for shot in &p.shots {
                assert!(shot.contains(" is darker than ") || shot.contains(" is lighter than ") || shot.contains(" is more vivid than "), "{shot}");
            }
        }
    }

    #[test]
    fn prompt_argument_errors() {
        let (pairs, matched) = corpus(10);
        let few = &matched[..3];
        assert!(build_prompts(few, &pairs, &labels(), &PromptConfig { k: 4, ..Default::default() }, None).is_err());
        assert!(build_prompts(&matched, &pairs, &labels(), &PromptConfig { k: 1, ..Default::default() }, None).is_err());
        let bad_template = PromptConfig { template: "{left} vs {right}".into(), ..Default::default() };
        assert!(build_prompts(&matched, &pairs, &labels(), &bad_template, None).is_err());
    }

    #[test]
    fn gold_never_leaks_into_query() {
        // every description contains "darker"; those pairs can only be shots
        let mut pairs = Vec::new();
        for i in 0..12 {
            let desc = if i < 10 { format!("darker night {i}") } else { format!("plain {i}") };
            pairs.push(pair(&format!("c{i}"), (10, 10, 10), &desc));
        }
        let matched: Vec<MatchedPair> = (0..12)
            .map(|i| MatchedPair {
                pair_id: format!("m{i}"),
                left_id: format!("c{i}"),
                right_id: format!("c{}", (i + 1) % 12),
                ranking: vec![RankedComparative { comparative: "DARKER".into(), cost: 0.0 }],
                gold: "DARKER".into(),
            })
            .collect();
        let config = PromptConfig { k: 3, count: 30, seed: 4, ..Default::default() };
        for p in build_prompts(&matched, &pairs, &labels(), &config, None).unwrap() {
            assert!(!tokenize(&p.query).contains(&"darker".to_string()), "{}", p.query);
        }
    }

    fn prompt(id: &str, gold: &str, slice: Option<&str>) -> PromptSet {
        PromptSet {
            prompt_id: id.into(),
            shots: vec![],
            query: "a is [MASK] than b".into(),
            mask_token: "[MASK]".into(),
            gold: gold.into(),
            candidates: vec!["A".into(), "B".into(), "C".into(), "D".into()],
            k: 2,
            query_pair_id: format!("pair-{id}"),
            slice: slice.map(str::to_owned),
        }
    }

    fn pred(id: &str, ranking: &[&str]) -> PredictionRecord {
        PredictionRecord {
            prompt_id: id.into(),
            ranking: ranking.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn mrr_arithmetic() {
        let prompts = vec![prompt("1", "A", Some("s1")), prompt("2", "A", Some("s1")), prompt("3", "A", Some("s2"))];
        let preds = vec![pred("1", &["A", "B"]), pred("2", &["B", "A"]), pred("3", &["B", "C", "D", "A"])];
        let r = eval_mrr(&prompts, &preds).unwrap();
        assert!((r.overall.mrr - (1.0 + 0.5 + 0.25) / 3.0).abs() < 1e-15);
        assert_eq!(r.per_slice["s1"].mrr, 0.75);
        assert_eq!(r.per_slice["s2"].mrr, 0.25);
        assert_eq!(r.correct().len(), 1);

        let r = eval_mrr(&prompts[..2], &[pred("1", &["A"]), pred("2", &["B"])]).unwrap();
        assert_eq!(r.overall.mrr, 0.5);
        assert_eq!(r.overall.missing, 1);

        let r = eval_mrr(&prompts, &[pred("1", &["A"])]).unwrap();
        assert_eq!(r.unanswered, 2);
        assert_eq!(r.overall.mrr, 1.0);
    }

    #[test]
    fn mrr_validation_errors() {
        let prompts = vec![prompt("1", "A", None)];
        assert!(eval_mrr(&prompts, &[pred("1", &["A"]), pred("1", &["B"])]).is_err());
        assert!(eval_mrr(&prompts, &[pred("9", &["A"])]).is_err());
        assert!(eval_mrr(&prompts, &[pred("1", &["A", "A"])]).is_err());
        assert!(eval_mrr(&prompts, &[pred("1", &["ZZZ"])]).is_err());
    }

    #[test]
    fn graph_edges_follow_correct_prompts() {
        let (pairs, matched) = corpus(10);
        let empty = comparative_graph(&matched, &pairs, &BTreeMap::new());
        assert!(empty.edges.is_empty());
        assert!(!empty.nodes.is_empty());

        let m = &matched[0];
        let correct: BTreeMap<String, String> = [("p1".to_string(), m.pair_id.clone())].into();
        let g = comparative_graph(&matched, &pairs, &correct);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].from, m.left_id);
        let dot = g.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("hexcolor=\"#"));
        assert!(dot.contains(&format!("[label=\"{}\"", m.gold.to_lowercase())));
        assert_eq!(dot_escape("say \"hi\""), "say \\\"hi\\\"");
    }
}
