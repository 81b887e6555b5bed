//! Lexicon-based description scores, color-word detection, POS pattern
//! counts, and equal-width score binning.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ColorPair, CorpusSlice, Provenance};
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const CONCRETENESS_RANGE: (f64, f64) = (1.0, 5.0);
pub const SUBJECTIVITY_RANGE: (f64, f64) = (0.0, 1.0);
pub const DEFAULT_BINS: usize = 5;

/// Suffixes tried, in order, when a token misses the concreteness lexicon.
const LEMMA_SUFFIXES: [&str; 4] = ["ing", "es", "ed", "s"];

/// The eleven basic English color terms with common plural and "-ish" forms.
pub const BASIC_COLOR_WORDS: &[&str] = &[
    "black", "blacks", "blackish", "white", "whites", "whitish", "red", "reds", "reddish",
    "green", "greens", "greenish", "yellow", "yellows", "yellowish", "blue", "blues", "bluish",
    "blueish", "brown", "browns", "brownish", "orange", "oranges", "orangish", "orangey", "pink",
    "pinks", "pinkish", "purple", "purples", "purplish", "gray", "grays", "grayish", "grey",
    "greys", "greyish",
];

fn read_lines(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Lemma to concreteness rating in [1, 5].
#[derive(Debug, Clone, Default)]
pub struct ConcretenessLexicon {
    scores: HashMap<String, f64>,
}

impl ConcretenessLexicon {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut scores = HashMap::new();
        for (lemma, score) in entries {
            let (lo, hi) = CONCRETENESS_RANGE;
            if !(lo..=hi).contains(&score) {
                return Err(Error::Validation(format!(
                    "concreteness for {:?} is {score}, outside [1, 5]",
                    lemma.as_ref()
                )));
            }
            scores.insert(lemma.as_ref().to_lowercase(), score);
        }
        Ok(ConcretenessLexicon { scores })
    }

    /// `lemma<TAB>score` per line; `#` comments and blank lines ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut f = line.split('\t');
            let (Some(lemma), Some(score), None) = (f.next(), f.next(), f.next()) else {
                return Err(Error::Row {
                    line: idx + 1,
                    message: "expected lemma<TAB>score".into(),
                });
            };
            let score = score.trim().parse::<f64>().map_err(|e| Error::Row {
                line: idx + 1,
                message: e.to_string(),
            })?;
            entries.push((lemma.trim().to_owned(), score));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_lines(path)?)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Exact match, else one suffix stripped.
    pub fn lookup(&self, token: &str) -> Option<f64> {
        if let Some(&s) = self.scores.get(token) {
            return Some(s);
        }
        LEMMA_SUFFIXES.iter().find_map(|suffix| {
            token
                .strip_suffix(suffix)
                .filter(|stem| !stem.is_empty())
                .and_then(|stem| self.scores.get(stem).copied())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SubjectivityEntry {
    subjectivity: f64,
    multiplier: Option<f64>,
}

/// Word subjectivity in [0, 1], plus intensifier multipliers.
#[derive(Debug, Clone, Default)]
pub struct SubjectivityLexicon {
    entries: HashMap<String, SubjectivityEntry>,
}

impl SubjectivityLexicon {
    /// Entries are `(word, subjectivity, modifier multiplier)`.
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64, Option<f64>)>,
        S: AsRef<str>,
    {
        let mut map = HashMap::new();
        for (word, subjectivity, multiplier) in entries {
            let word = word.as_ref();
            if !(0.0..=1.0).contains(&subjectivity) {
                return Err(Error::Validation(format!(
                    "subjectivity for {word:?} is {subjectivity}, outside [0, 1]"
                )));
            }
            if let Some(m) = multiplier {
                if !(m.is_finite() && m > 0.0) {
                    return Err(Error::Validation(format!(
                        "modifier multiplier for {word:?} must be positive, got {m}"
                    )));
                }
            }
            map.insert(
                word.to_lowercase(),
                SubjectivityEntry {
                    subjectivity,
                    multiplier,
                },
            );
        }
        Ok(SubjectivityLexicon { entries: map })
    }

    /// `word<TAB>subjectivity[<TAB>modifier_multiplier]` per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let row_err = |message: String| Error::Row {
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(row_err("expected word<TAB>subjectivity[<TAB>multiplier]".into()));
            }
            let subj = fields[1].parse::<f64>().map_err(|e| row_err(e.to_string()))?;
            let mult = match fields.get(2) {
                Some(m) if !m.is_empty() => Some(m.parse::<f64>().map_err(|e| row_err(e.to_string()))?),
                _ => None,
            };
            entries.push((fields[0].to_owned(), subj, mult));
        }
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_lines(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mean concreteness over covered tokens, and the covered fraction.
pub fn concreteness(description: &str, lex: &ConcretenessLexicon) -> (Option<f64>, f64) {
    let tokens = tokenize(description);
    if tokens.is_empty() {
        return (None, 0.0);
    }
    let hits: Vec<f64> = tokens.iter().filter_map(|t| lex.lookup(t)).collect();
    let covered = hits.len() as f64 / tokens.len() as f64;
    if hits.is_empty() {
        (None, 0.0)
    } else {
        (Some(hits.iter().sum::<f64>() / hits.len() as f64), covered)
    }
}

/// Mean subjectivity of covered words. A run of modifier words scales the
/// word that follows it by the product of their multipliers; a run with no
/// covered word after it counts each modifier by its own subjectivity.
pub fn subjectivity(description: &str, lex: &SubjectivityLexicon) -> f64 {
    let mut values = Vec::new();
    let mut pending: Vec<f64> = Vec::new();
    let mut scale = 1.0;
    for token in tokenize(description) {
        match lex.entries.get(&token) {
            Some(SubjectivityEntry {
                subjectivity,
                multiplier: Some(m),
            }) => {
                pending.push(*subjectivity);
                scale *= m;
            }
            Some(entry) => {
                values.push(entry.subjectivity * scale);
                pending.clear();
                scale = 1.0;
            }
            None => {
                values.append(&mut pending);
                scale = 1.0;
            }
        }
    }
    values.append(&mut pending);
    if values.is_empty() {
        0.0
    } else {
        (values.iter().sum::<f64>() / values.len() as f64).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorWords(HashSet<String>);

impl ColorWords {
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: HashSet<String> = words
            .into_iter()
            .map(|w| w.as_ref().trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        if set.is_empty() {
            return Err(Error::Validation("color-word list is empty".into()));
        }
        Ok(ColorWords(set))
    }

    pub fn basic() -> Self {
        Self::new(BASIC_COLOR_WORDS.iter()).expect("non-empty")
    }

    /// One word per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_lines(path)?;
        Self::new(text.lines().filter(|l| !l.starts_with('#')))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

pub fn has_color_word(description: &str, colorwords: &ColorWords) -> bool {
    tokenize(description).iter().any(|t| colorwords.contains(t))
}

/// Tag-sequence frequencies, most frequent first (ties lexicographic).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosPatternCounts {
    pub patterns: Vec<(Vec<String>, usize)>,
    pub untagged: usize,
}

impl PosPatternCounts {
    pub fn get(&self, pattern: &[&str]) -> Option<usize> {
        self.patterns
            .iter()
            .find(|(p, _)| p.iter().map(String::as_str).eq(pattern.iter().copied()))
            .map(|(_, c)| *c)
    }
}

pub fn pos_pattern_counts(pairs: &[ColorPair]) -> PosPatternCounts {
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut untagged = 0;
    for pair in pairs {
        match &pair.pos_tags {
            Some(tags) => *counts.entry(tags.clone()).or_default() += 1,
            None => untagged += 1,
        }
    }
    let mut patterns: Vec<_> = counts.into_iter().collect();
    // BTreeMap order is lexicographic; a stable sort keeps it among equal counts.
    patterns.sort_by_key(|p| std::cmp::Reverse(p.1));
    PosPatternCounts { patterns, untagged }
}

/// Per-description scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDescription {
    pub id: String,
    pub concreteness: Option<f64>,
    pub subjectivity: f64,
    pub covered_fraction: f64,
    pub has_color_word: bool,
}

pub fn score_pair(
    pair: &ColorPair,
    conc: &ConcretenessLexicon,
    subj: &SubjectivityLexicon,
    colorwords: &ColorWords,
) -> ScoredDescription {
    let (concreteness, covered_fraction) = concreteness(&pair.description, conc);
    ScoredDescription {
        id: pair.id.clone(),
        concreteness,
        subjectivity: subjectivity(&pair.description, subj),
        covered_fraction,
        has_color_word: has_color_word(&pair.description, colorwords),
    }
}

/// `k` equal-width bins over `[lo, hi]`: `[lo, lo+w), ..., [hi-w, hi]`.
/// All `k` slices are returned, including empty ones; no scores yields no slices.
pub fn uniform_bins(
    scores: &BTreeMap<String, f64>,
    k: usize,
    range: (f64, f64),
    score_name: &str,
) -> Result<Vec<CorpusSlice>> {
    let (lo, hi) = range;
    if k == 0 {
        return Err(Error::Argument("bin count must be at least 1".into()));
    }
    if !(lo < hi) {
        return Err(Error::Argument(format!("empty bin range [{lo}, {hi}]")));
    }
    if scores.is_empty() {
        return Ok(Vec::new());
    }
    let width = (hi - lo) / k as f64;
    let mut members = vec![BTreeSet::new(); k];
    for (id, &s) in scores {
        if !(lo..=hi).contains(&s) {
            return Err(Error::Argument(format!(
                "score {s} for {id} outside [{lo}, {hi}]"
            )));
        }
        let idx = (((s - lo) / (hi - lo)) * k as f64).floor() as usize;
        members[idx.min(k - 1)].insert(id.clone());
    }
    Ok(members
        .into_iter()
        .enumerate()
        .map(|(index, member_ids)| CorpusSlice {
            name: format!("{score_name}_bin{index}"),
            member_ids,
            provenance: Provenance::ScoreBin {
                score: score_name.to_owned(),
                index,
                lo: lo + width * index as f64,
                hi: if index + 1 == k { hi } else { lo + width * (index + 1) as f64 },
            },
        })
        .collect())
}

pub const SCORES_HEADER: &str = "id\tconcreteness\tsubjectivity\tcovered_fraction\thas_color_word";

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| v.to_string())
}

/// Tab-separated with a header row; an absent concreteness is `NA`.
pub fn scores_to_tsv(scores: &[ScoredDescription]) -> String {
    let mut out = String::from(SCORES_HEADER);
    out.push('\n');
    for s in scores {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            s.id,
            na(s.concreteness),
            s.subjectivity,
            s.covered_fraction,
            u8::from(s.has_color_word)
        ));
    }
    out
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoredDescription>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == SCORES_HEADER => {}
        _ => return Err(Error::format("scores header", format!("expected {SCORES_HEADER:?}"))),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row_err = |message: String| Error::Row { line: idx + 1, message };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(row_err(format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |f: &str| f.parse::<f64>().map_err(|e| row_err(format!("{f:?}: {e}")));
        out.push(ScoredDescription {
            id: fields[0].to_owned(),
            concreteness: if fields[1] == "NA" { None } else { Some(num(fields[1])?) },
            subjectivity: num(fields[2])?,
            covered_fraction: num(fields[3])?,
            has_color_word: match fields[4] {
                "1" => true,
                "0" => false,
                other => return Err(row_err(format!("has_color_word must be 0 or 1, got {other:?}"))),
            },
        });
    }
    Ok(out)
}

/// Two slices, `color_word_yes` and `color_word_no`.
pub fn color_word_slices(scores: &[ScoredDescription]) -> Vec<CorpusSlice> {
    [("yes", true), ("no", false)]
        .into_iter()
        .map(|(suffix, flag)| {
            let name = format!("color_word_{suffix}");
            CorpusSlice {
                member_ids: scores
                    .iter()
                    .filter(|s| s.has_color_word == flag)
                    .map(|s| s.id.clone())
                    .collect(),
                provenance: Provenance::Filter { name: name.clone() },
                name,
            }
        })
        .collect()
}
