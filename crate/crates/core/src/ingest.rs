//! Corpus filtering and descriptive statistics.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::data::ColorPair;
use crate::error::{Error, Result};
use crate::scoring::{has_color_word, pos_pattern_counts, ColorWords, PosPatternCounts};
use crate::text::{tokenize, word_count};

pub const DEFAULT_MAX_WORDS: usize = 5;
pub const MAX_WORDS_REASON: &str = "max_words";
const TOP_WORDS: usize = 25;
const TOP_PATTERNS: usize = 25;

/// A named regex; a description matching it is dropped.
#[derive(Debug, Clone)]
pub struct Rule {
    pub name: String,
    pub pattern: Regex,
}

/// Drop rules read from a text file: one rule per line, either
/// `name<TAB>pattern` or a bare pattern (named `rule<line>`). Blank lines
/// and lines starting with `#` are skipped.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules: Vec<Rule> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (name, pattern) = match line.split_once('\t') {
                Some((name, pattern)) => (name.trim().to_owned(), pattern),
                None => (format!("rule{}", idx + 1), line),
            };
            if name.is_empty() || name == MAX_WORDS_REASON {
                return Err(Error::Row {
                    line: idx + 1,
                    message: format!("invalid rule name {name:?}"),
                });
            }
            if rules.iter().any(|r| r.name == name) {
                return Err(Error::Row {
                    line: idx + 1,
                    message: format!("duplicate rule name {name:?}"),
                });
            }
            let pattern = Regex::new(pattern).map_err(|e| Error::Row {
                line: idx + 1,
                message: format!("bad pattern: {e}"),
            })?;
            rules.push(Rule { name, pattern });
        }
        Ok(RuleSet { rules })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Name of the first matching rule.
    pub fn first_match(&self, description: &str) -> Option<&str> {
        self.rules
            .iter()
            .find(|r| r.pattern.is_match(description))
            .map(|r| r.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub id: String,
    pub reason: String,
}

/// Per-reason drop counts. Every rule appears, even with a zero count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub input: usize,
    pub kept: usize,
    pub counts: BTreeMap<String, usize>,
    pub dropped: Vec<Dropped>,
}

/// Drops descriptions longer than `max_words`, then those matching a rule.
/// Each dropped pair is charged to the first reason that applies.
pub fn filter_pairs(pairs: Vec<ColorPair>, rules: &RuleSet, max_words: usize) -> (Vec<ColorPair>, DropReport) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    counts.insert(MAX_WORDS_REASON.to_owned(), 0);
    for rule in rules.rules() {
        counts.insert(rule.name.clone(), 0);
    }
    let input = pairs.len();
    let mut kept = Vec::with_capacity(input);
    let mut dropped = Vec::new();
    for pair in pairs {
        let reason = if word_count(&pair.description) > max_words {
            Some(MAX_WORDS_REASON)
        } else {
            rules.first_match(&pair.description)
        };
        match reason {
            Some(reason) => {
                *counts.get_mut(reason).expect("reason registered") += 1;
                dropped.push(Dropped {
                    id: pair.id.clone(),
                    reason: reason.to_owned(),
                });
            }
            None => kept.push(pair),
        }
    }
    let report = DropReport {
        input,
        kept: kept.len(),
        counts,
        dropped,
    };
    (kept, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCount {
    pub word: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pairs: usize,
    pub tokens: usize,
    pub vocabulary: usize,
    /// Most frequent tokens; ties broken alphabetically.
    pub top_words: Vec<WordCount>,
    /// Number of descriptions by word count.
    pub length_histogram: BTreeMap<usize, usize>,
    pub with_color_word: usize,
    pub color_word_fraction: f64,
    pub pos_patterns: PosPatternCounts,
}

pub fn corpus_stats(pairs: &[ColorPair], colorwords: &ColorWords) -> CorpusStats {
    let mut freq: HashMap<String, usize> = HashMap::new();
    let mut tokens = 0;
    let mut length_histogram = BTreeMap::new();
    let mut with_color_word = 0;
    for pair in pairs {
        let toks = tokenize(&pair.description);
        tokens += toks.len();
        *length_histogram.entry(toks.len()).or_default() += 1;
        for t in toks {
            *freq.entry(t).or_default() += 1;
        }
        if has_color_word(&pair.description, colorwords) {
            with_color_word += 1;
        }
    }
    let vocabulary = freq.len();
    let mut top: Vec<WordCount> = freq.into_iter().map(|(word, count)| WordCount { word, count }).collect();
    top.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    top.truncate(TOP_WORDS);
    let mut pos_patterns = pos_pattern_counts(pairs);
    pos_patterns.patterns.truncate(TOP_PATTERNS);
    CorpusStats {
        pairs: pairs.len(),
        tokens,
        vocabulary,
        top_words: top,
        length_histogram,
        with_color_word,
        color_word_fraction: if pairs.is_empty() {
            0.0
        } else {
            with_color_word as f64 / pairs.len() as f64
        },
        pos_patterns,
    }
}
