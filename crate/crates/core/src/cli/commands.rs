use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::run::{require_paths, Run, RunSummary};
use super::*;
use crate::alignment::{
    align_slices, cluster_slices, AlignParams, AlignmentReport, GwParams, LmapParams,
};
use crate::comparatives::{
    build_prompts, comparative_graph, eval_mrr, match_sampled_pairs, parse_matched, parse_predictions,
    parse_prompts, parse_tuples, to_jsonl, vocabulary, MatchedPair, PromptConfig, PromptOutcome,
};
use crate::data::{join, parse_pairs, ColorPair, CorpusSlice, EmbeddingMatrix, Provenance, EMBEDDING_MAGIC};
use crate::ingest::{corpus_stats, filter_pairs, RuleSet};
use crate::scoring::{
    color_word_slices, parse_scores, score_pair, scores_to_tsv, uniform_bins, ColorWords, ConcretenessLexicon,
    SubjectivityLexicon,
};

const SLICE_DIR: &str = "slices";

pub fn dispatch(cli: &Cli) -> Result<RunSummary> {
    log::info!("running {}", cli.command.name());
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a),
        Command::Score(a) => score(cli, a),
        Command::Segment(a) => segment(cli, a),
        Command::Align(a) => align(cli, a),
        Command::Match(a) => match_cmd(cli, a),
        Command::Prompts(a) => prompts(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Cluster(a) => cluster(cli, a),
        Command::Graph(a) => graph(cli, a),
    }
}

/// Attaches the file name to a parse error.
fn in_file(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Io { .. } => e,
        other => Error::format(path.display().to_string(), other.to_string()),
    }
}

fn stage(left: &Path, right: &Path, message: impl Into<String>) -> Error {
    Error::Stage {
        left: left.to_path_buf(),
        right: right.to_path_buf(),
        message: message.into(),
    }
}

fn load_pairs(run: &mut Run, path: &Path) -> Result<Vec<ColorPair>> {
    let text = run.read_text("pairs", path)?;
    let file = parse_pairs(&text);
    if let Some(first) = file.errors.first() {
        return Err(Error::format(
            path.display().to_string(),
            format!(
                "{} malformed rows, first at line {}: {}; run ingest first",
                file.errors.len(),
                first.line,
                first.message
            ),
        ));
    }
    Ok(file.pairs)
}

fn load_embeddings(run: &mut Run, path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = run.read("embeddings", path)?;
    let parsed = if bytes.starts_with(EMBEDDING_MAGIC) {
        EmbeddingMatrix::from_bytes(&bytes)
    } else {
        std::str::from_utf8(&bytes)
            .map_err(|e| Error::format("embeddings", e.to_string()))
            .and_then(EmbeddingMatrix::from_tsv)
    };
    parsed.map_err(in_file(path))
}

fn load_colorwords(run: &mut Run, path: Option<&Path>) -> Result<ColorWords> {
    match path {
        Some(p) => {
            let text = run.read_text("colorwords", p)?;
            ColorWords::new(text.lines().filter(|l| !l.starts_with('#'))).map_err(in_file(p))
        }
        None => Ok(ColorWords::basic()),
    }
}

/// Embedding ids must all be pairs, otherwise the two files came from
/// different corpora.
fn check_join(pairs: &[ColorPair], emb: &EmbeddingMatrix, pairs_path: &Path, emb_path: &Path) -> Result<()> {
    join(pairs, emb).map(|_| ()).map_err(|e| match e {
        Error::Join { missing } => stage(
            emb_path,
            pairs_path,
            format!(
                "{} embedding ids are not in the pairs file, e.g. {}",
                missing.len(),
                missing.iter().take(3).cloned().collect::<Vec<_>>().join(", ")
            ),
        ),
        other => other,
    })
}

fn slice_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn slice_order(s: &CorpusSlice) -> (String, usize, String) {
    match &s.provenance {
        Provenance::ScoreBin { score, index, .. } => (score.clone(), *index, s.name.clone()),
        Provenance::Cluster { space, index, parent, .. } => (
            format!("{}{space}", parent.as_deref().map(|p| format!("{p}.")).unwrap_or_default()),
            *index,
            s.name.clone(),
        ),
        Provenance::Filter { name } => (name.clone(), 0, s.name.clone()),
    }
}

/// Reads slice files, each mapped to the path it came from, in bin order.
fn load_slices(run: &mut Run, paths: &[PathBuf]) -> Result<Vec<(CorpusSlice, PathBuf)>> {
    let mut out = Vec::new();
    for file in slice_files(paths)? {
        let text = run.read_text("slices", &file)?;
        let slice: CorpusSlice =
            serde_json::from_str(&text).map_err(|e| Error::format(file.display().to_string(), e.to_string()))?;
        out.push((slice, file));
    }
    if out.is_empty() && !paths.is_empty() {
        return Err(Error::Argument("no slice files found".into()));
    }
    out.sort_by_key(|(s, _)| slice_order(s));
    let mut names = BTreeSet::new();
    for (s, _) in &out {
        if !names.insert(s.name.clone()) {
            return Err(Error::Validation(format!("slice {:?} given twice", s.name)));
        }
    }
    Ok(out)
}

fn check_members(slice: &CorpusSlice, file: &Path, ids: &BTreeSet<&str>, other: &Path) -> Result<()> {
    let missing: Vec<&String> = slice.member_ids.iter().filter(|id| !ids.contains(id.as_str())).collect();
    if missing.is_empty() {
        return Ok(());
    }
    Err(stage(
        file,
        other,
        format!(
            "slice {:?} has {} ids absent here, e.g. {}",
            slice.name,
            missing.len(),
            missing[0]
        ),
    ))
}

fn write_slices(run: &mut Run, slices: &[CorpusSlice]) -> Result<Vec<serde_json::Value>> {
    let mut summary = Vec::new();
    for s in slices {
        run.write_json(&format!("{SLICE_DIR}/{}.json", s.name), s)?;
        summary.push(json!({ "name": s.name, "n": s.len(), "provenance": s.provenance }));
    }
    Ok(summary)
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<RunSummary> {
    require_paths([a.pairs.as_path()].into_iter().chain(a.colorwords.as_deref()))?;
    let mut run = Run::new("ingest", "ingest".into(), &cli.out, cli.seed);
    let text = run.read_text("pairs", &a.pairs)?;
    let rules = match &a.rules {
        Some(p) if p.exists() => {
            let text = run.read_text("rules", p)?;
            RuleSet::parse(&text).map_err(in_file(p))?
        }
        Some(p) => {
            run.warn(format!("rule file {} not found; applying the word-count filter only", p.display()));
            RuleSet::default()
        }
        None => {
            run.warn("no rule file given; applying the word-count filter only".into());
            RuleSet::default()
        }
    };
    let colorwords = load_colorwords(&mut run, a.colorwords.as_deref())?;

    let file = parse_pairs(&text);
    if !file.errors.is_empty() {
        run.warn(format!("{} malformed rows skipped", file.errors.len()));
    }
    let (kept, drops) = filter_pairs(file.pairs, &rules, a.max_words);
    let stats = corpus_stats(&kept, &colorwords);
    run.write("pairs.clean.tsv", crate::data::pairs_to_tsv(&kept).as_bytes())?;
    run.write_json("drops.json", &drops)?;
    run.finish(
        json!({
            "max_words": a.max_words,
            "rules": rules.rules().iter().map(|r| json!({"name": r.name, "pattern": r.pattern.as_str()})).collect::<Vec<_>>(),
        }),
        json!({
            "rows_read": drops.input + file.errors.len(),
            "row_errors": file.errors,
            "parsed": drops.input,
            "kept": drops.kept,
            "drop_counts": drops.counts,
            "stats": stats,
        }),
    )
}

fn score(cli: &Cli, a: &ScoreArgs) -> Result<RunSummary> {
    require_paths(
        [a.pairs.as_path(), a.concreteness.as_path(), a.subjectivity.as_path()]
            .into_iter()
            .chain(a.colorwords.as_deref()),
    )?;
    let mut run = Run::new("score", "score".into(), &cli.out, cli.seed);
    let pairs = load_pairs(&mut run, &a.pairs)?;
    let conc = ConcretenessLexicon::parse(&run.read_text("concreteness", &a.concreteness)?)
        .map_err(in_file(&a.concreteness))?;
    let subj = SubjectivityLexicon::parse(&run.read_text("subjectivity", &a.subjectivity)?)
        .map_err(in_file(&a.subjectivity))?;
    let colorwords = load_colorwords(&mut run, a.colorwords.as_deref())?;

    let scores: Vec<_> = pairs.iter().map(|p| score_pair(p, &conc, &subj, &colorwords)).collect();
    let unrated = scores.iter().filter(|s| s.concreteness.is_none()).count();
    if unrated > 0 {
        run.warn(format!("{unrated} descriptions have no rated word; concreteness is NA"));
    }
    let mean = |v: Vec<f64>| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
    let result = json!({
        "n": scores.len(),
        "concreteness_na": unrated,
        "with_color_word": scores.iter().filter(|s| s.has_color_word).count(),
        "mean_concreteness": mean(scores.iter().filter_map(|s| s.concreteness).collect()),
        "mean_subjectivity": mean(scores.iter().map(|s| s.subjectivity).collect()),
        "mean_covered_fraction": mean(scores.iter().map(|s| s.covered_fraction).collect()),
        "concreteness_lexicon_size": conc.len(),
        "subjectivity_lexicon_size": subj.len(),
    });
    run.write("scores.tsv", scores_to_tsv(&scores).as_bytes())?;
    run.finish(json!({}), result)
}

fn segment(cli: &Cli, a: &SegmentArgs) -> Result<RunSummary> {
    require_paths([a.scores.as_path()])?;
    let by = match a.by {
        SegmentBy::Subjectivity => "subjectivity",
        SegmentBy::Concreteness => "concreteness",
        SegmentBy::ColorWord => "color_word",
    };
    let mut run = Run::new("segment", format!("segment-{by}"), &cli.out, cli.seed);
    let scores = parse_scores(&run.read_text("scores", &a.scores)?).map_err(in_file(&a.scores))?;
    let mut excluded = 0;
    let slices = match a.by {
        SegmentBy::Subjectivity => {
            let values = scores.iter().map(|s| (s.id.clone(), s.subjectivity)).collect();
            uniform_bins(&values, a.bins, (0.0, 1.0), by)?
        }
        SegmentBy::Concreteness => {
            let values: BTreeMap<String, f64> = scores
                .iter()
                .filter_map(|s| s.concreteness.map(|c| (s.id.clone(), c)))
                .collect();
            excluded = scores.len() - values.len();
            uniform_bins(&values, a.bins, (1.0, 5.0), by)?
        }
        SegmentBy::ColorWord => color_word_slices(&scores),
    };
    if excluded > 0 {
        run.warn(format!("{excluded} descriptions without concreteness left out of every bin"));
    }
    for s in slices.iter().filter(|s| s.is_empty()) {
        run.warn(format!("slice {} is empty", s.name));
    }
    let summary = write_slices(&mut run, &slices)?;
    let bins = (a.by != SegmentBy::ColorWord).then_some(a.bins);
    run.finish(
        json!({ "by": by, "bins": bins }),
        json!({ "slices": summary, "excluded": excluded }),
    )
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| v.to_string())
}

fn align(cli: &Cli, a: &AlignArgs) -> Result<RunSummary> {
    require_paths(
        [a.pairs.as_path(), a.embeddings.as_path()]
            .into_iter()
            .chain(a.slices.iter().map(PathBuf::as_path)),
    )?;
    let mut params = AlignParams {
        lmap: LmapParams {
            alpha: a.alpha,
            folds: a.folds,
            seed: cli.seed,
            ..LmapParams::default()
        },
        gw: GwParams {
            epsilon: a.epsilon,
            max_outer: a.max_outer,
            tol: a.tol,
            seed: cli.seed,
            ..GwParams::default()
        },
        floor: a.floor,
    };
    if a.eps_schedule == ScheduleArg::Geometric {
        params.gw = params.gw.with_geometric_schedule();
    }
    if !(a.alpha >= 0.0 && a.epsilon > 0.0 && a.tol > 0.0) {
        return Err(Error::Argument("alpha must be >= 0; epsilon and tol must be > 0".into()));
    }

    let mut run = Run::new("align", format!("align-{}", a.method.as_str()), &cli.out, cli.seed);
    let pairs = load_pairs(&mut run, &a.pairs)?;
    let emb = load_embeddings(&mut run, &a.embeddings)?;
    let loaded = load_slices(&mut run, &a.slices)?;
    check_join(&pairs, &emb, &a.pairs, &a.embeddings)?;

    let emb_ids: BTreeSet<&str> = emb.ids().iter().map(String::as_str).collect();
    for (slice, file) in &loaded {
        check_members(slice, file, &emb_ids, &a.embeddings)?;
    }
    let slices: Vec<CorpusSlice> = if loaded.is_empty() {
        vec![CorpusSlice {
            name: "all".into(),
            member_ids: emb.ids().iter().cloned().collect(),
            provenance: Provenance::Filter { name: "all".into() },
        }]
    } else {
        loaded.into_iter().map(|(s, _)| s).collect()
    };

    let mut reports: Vec<AlignmentReport> = Vec::new();
    for method in a.method.methods() {
        log::info!("{method} on {} slices", slices.len());
        reports.extend(align_slices(&pairs, &emb, &slices, method, &params)?);
    }
    for r in &reports {
        for w in &r.warnings {
            run.warn(format!("{} {}: {w}", r.method, r.slice));
        }
        for (check, ok) in &r.checks {
            if !ok {
                run.warn(format!("{} {}: check {check} failed", r.method, r.slice));
            }
        }
    }

    let by_name: BTreeMap<&str, &CorpusSlice> = slices.iter().map(|s| (s.name.as_str(), s)).collect();
    let mut curve = String::from("method\tslice\tindex\tlo\thi\tn\tscore\n");
    for r in &reports {
        let (index, lo, hi) = match by_name.get(r.slice.as_str()).map(|s| &s.provenance) {
            Some(Provenance::ScoreBin { index, lo, hi, .. }) => (Some(*index), Some(*lo), Some(*hi)),
            Some(Provenance::Cluster { index, .. }) => (Some(*index), None, None),
            _ => (None, None, None),
        };
        curve.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.method,
            r.slice,
            index.map_or_else(|| "NA".to_owned(), |i| i.to_string()),
            na(lo),
            na(hi),
            r.n,
            na(r.score)
        ));
    }
    run.write(&format!("align-{}.curve.tsv", a.method.as_str()), curve.as_bytes())?;
    run.finish(
        json!({
            "method": a.method.as_str(),
            "align": params,
            "embedding_meta": emb.meta(),
            "embedding_dim": emb.dim(),
        }),
        json!({ "reports": reports }),
    )
}

fn match_cmd(cli: &Cli, a: &MatchArgs) -> Result<RunSummary> {
    require_paths([a.pairs.as_path(), a.tuples.as_path()])?;
    let mut run = Run::new("match", "match".into(), &cli.out, cli.seed);
    let pairs = load_pairs(&mut run, &a.pairs)?;
    let tuples = parse_tuples(&run.read_text("tuples", &a.tuples)?).map_err(in_file(&a.tuples))?;
    if tuples.is_empty() {
        return Err(Error::Validation(format!("{} has no comparative tuples", a.tuples.display())));
    }
    let matched = match_sampled_pairs(&pairs, &tuples, a.count, cli.seed)?;
    if matched.len() < a.count {
        run.warn(format!(
            "only {} distinct ordered pairs exist; matched all of them",
            matched.len()
        ));
    }
    let mut gold: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &matched {
        *gold.entry(m.gold.as_str()).or_default() += 1;
    }
    let result = json!({
        "matched": matched.len(),
        "comparatives": vocabulary(&tuples),
        "tuples": tuples.len(),
        "gold_counts": gold,
    });
    run.write("matched.jsonl", to_jsonl(&matched).as_bytes())?;
    run.finish(json!({ "count": a.count }), result)
}

fn candidates(matched: &[MatchedPair]) -> Vec<String> {
    let set: BTreeSet<&str> = matched
        .iter()
        .flat_map(|m| m.ranking.iter().map(|r| r.comparative.as_str()))
        .collect();
    set.into_iter().map(str::to_owned).collect()
}

fn check_matched_ids(matched: &[MatchedPair], pairs: &[ColorPair], matched_path: &Path, pairs_path: &Path) -> Result<()> {
    let ids: BTreeSet<&str> = pairs.iter().map(|p| p.id.as_str()).collect();
    match matched
        .iter()
        .flat_map(|m| [&m.left_id, &m.right_id])
        .find(|id| !ids.contains(id.as_str()))
    {
        Some(id) => Err(stage(matched_path, pairs_path, format!("matched id {id:?} is not a pair"))),
        None => Ok(()),
    }
}

fn prompts(cli: &Cli, a: &PromptsArgs) -> Result<RunSummary> {
    require_paths(
        [a.pairs.as_path(), a.matched.as_path()]
            .into_iter()
            .chain(a.slices.iter().map(PathBuf::as_path)),
    )?;
    let mut run = Run::new("prompts", "prompts".into(), &cli.out, cli.seed);
    let pairs = load_pairs(&mut run, &a.pairs)?;
    let matched = parse_matched(&run.read_text("matched", &a.matched)?).map_err(in_file(&a.matched))?;
    let slices = load_slices(&mut run, &a.slices)?;
    check_matched_ids(&matched, &pairs, &a.matched, &a.pairs)?;

    let config = PromptConfig {
        k: a.k,
        count: a.count,
        seed: cli.seed,
        template: a.template.clone(),
        mask_token: a.mask_token.clone(),
    };
    let labels = candidates(&matched);
    let mut prompts = Vec::new();
    let mut per_slice = BTreeMap::new();
    if slices.is_empty() {
        prompts = build_prompts(&matched, &pairs, &labels, &config, None)?;
    } else {
        for (slice, _) in &slices {
            let within: Vec<MatchedPair> = matched
                .iter()
                .filter(|m| slice.contains(&m.left_id) && slice.contains(&m.right_id))
                .cloned()
                .collect();
            if within.len() < a.k {
                run.warn(format!(
                    "slice {} has {} matched pairs, fewer than K={}; skipped",
                    slice.name,
                    within.len(),
                    a.k
                ));
                per_slice.insert(slice.name.clone(), 0);
                continue;
            }
            let built = build_prompts(&within, &pairs, &labels, &config, Some(&slice.name))?;
            per_slice.insert(slice.name.clone(), built.len());
            prompts.extend(built);
        }
    }
    run.write("prompts.jsonl", to_jsonl(&prompts).as_bytes())?;
    run.finish(
        serde_json::to_value(&config).expect("serializable"),
        json!({
            "prompts": prompts.len(),
            "per_slice": per_slice,
            "candidates": labels.len(),
        }),
    )
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<RunSummary> {
    require_paths([a.prompts.as_path(), a.predictions.as_path()])?;
    let mut run = Run::new("eval", "eval".into(), &cli.out, cli.seed);
    let prompts = parse_prompts(&run.read_text("prompts", &a.prompts)?).map_err(in_file(&a.prompts))?;
    let preds =
        parse_predictions(&run.read_text("predictions", &a.predictions)?).map_err(in_file(&a.predictions))?;
    let ids: BTreeSet<&str> = prompts.iter().map(|p| p.prompt_id.as_str()).collect();
    if let Some(p) = preds.iter().find(|p| !ids.contains(p.prompt_id.as_str())) {
        return Err(stage(
            &a.predictions,
            &a.prompts,
            format!("prediction for unknown prompt {:?}", p.prompt_id),
        ));
    }
    let report = eval_mrr(&prompts, &preds)?;
    if report.unanswered > 0 {
        run.warn(format!("{} prompts have no prediction; left out of the mean", report.unanswered));
    }
    if report.overall.missing > 0 {
        run.warn(format!("{} rankings lack the gold label; counted as 0", report.overall.missing));
    }
    let mut tsv = String::from("slice\tmrr\tn\tmissing\n");
    let row = |name: &str, s: &crate::comparatives::MrrSummary| format!("{name}\t{}\t{}\t{}\n", s.mrr, s.n, s.missing);
    tsv.push_str(&row("all", &report.overall));
    for (name, s) in &report.per_slice {
        tsv.push_str(&row(name, s));
    }
    run.write("mrr.tsv", tsv.as_bytes())?;
    run.finish(json!({}), serde_json::to_value(&report).expect("serializable"))
}

fn cluster(cli: &Cli, a: &ClusterArgs) -> Result<RunSummary> {
    require_paths([a.pairs.as_path(), a.embeddings.as_path()].into_iter().chain(a.within.as_deref()))?;
    let space = a.space.as_str();
    let mut run = Run::new("cluster", String::new(), &cli.out, cli.seed);
    let pairs = load_pairs(&mut run, &a.pairs)?;
    let emb = load_embeddings(&mut run, &a.embeddings)?;
    let within = match &a.within {
        Some(p) => load_slices(&mut run, std::slice::from_ref(p))?.into_iter().next(),
        None => None,
    };
    check_join(&pairs, &emb, &a.pairs, &a.embeddings)?;

    let emb = match &within {
        Some((slice, file)) => {
            let ids: BTreeSet<&str> = emb.ids().iter().map(String::as_str).collect();
            check_members(slice, file, &ids, &a.embeddings)?;
            emb.subset(&slice.member_ids)
        }
        None => emb,
    };
    let parent = within.as_ref().map(|(s, _)| s.name.as_str());
    let name = match parent {
        Some(p) => format!("cluster-{space}-k{}-within-{p}", a.k),
        None => format!("cluster-{space}-k{}", a.k),
    };
    run = run.renamed(name);
    let (x, y) = join(&pairs, &emb)?;
    let points = match a.space {
        SpaceArg::Color => y.to_array(),
        SpaceArg::Embedding => x.to_array(),
    };
    let (slices, result) = cluster_slices(x.ids(), points.view(), a.k, cli.seed, space, parent)?;
    if result.reseeded > 0 {
        run.warn(format!("{} empty clusters were reseeded", result.reseeded));
    }
    let summary = write_slices(&mut run, &slices)?;
    run.finish(
        json!({ "space": space, "k": a.k, "within": parent }),
        json!({
            "n": x.len(),
            "slices": summary,
            "inertia": result.inertia,
            "iterations": result.iterations,
            "reseeded": result.reseeded,
        }),
    )
}

fn graph(cli: &Cli, a: &GraphArgs) -> Result<RunSummary> {
    require_paths([a.pairs.as_path(), a.matched.as_path(), a.eval.as_path()])?;
    let mut run = Run::new("graph", "graph".into(), &cli.out, cli.seed);
    let pairs = load_pairs(&mut run, &a.pairs)?;
    let matched = parse_matched(&run.read_text("matched", &a.matched)?).map_err(in_file(&a.matched))?;
    let report: serde_json::Value = serde_json::from_str(&run.read_text("eval", &a.eval)?)
        .map_err(|e| Error::format(a.eval.display().to_string(), e.to_string()))?;
    let outcomes: Vec<PromptOutcome> = report
        .pointer("/result/outcomes")
        .cloned()
        .ok_or_else(|| Error::format(a.eval.display().to_string(), "not an eval report"))
        .and_then(|v| serde_json::from_value(v).map_err(|e| Error::format(a.eval.display().to_string(), e.to_string())))?;
    check_matched_ids(&matched, &pairs, &a.matched, &a.pairs)?;

    let correct: BTreeMap<String, String> = outcomes
        .into_iter()
        .filter(|o| o.rank == Some(1))
        .map(|o| (o.prompt_id, o.query_pair_id))
        .collect();
    let graph = comparative_graph(&matched, &pairs, &correct);
    if graph.unresolved > 0 {
        return Err(stage(
            &a.eval,
            &a.matched,
            format!("{} correct prompts refer to pairs that were not matched", graph.unresolved),
        ));
    }
    run.write("graph.dot", graph.to_dot().as_bytes())?;
    run.finish(
        json!({}),
        json!({ "nodes": graph.nodes.len(), "edges": graph.edges.len(), "correct": correct.len() }),
    )
}
