//! Seeded synthetic corpus with planted and scrambled halves.
//!
//! Planted pairs get an embedding that is their CIELAB coordinate lifted
//! into `SYNTHETIC_DIM` dimensions by a map with orthonormal columns, so the
//! text and color geometries are isometric. Scrambled pairs get the lifted
//! coordinate of another scrambled pair, and their descriptions carry
//! subjective words so that segmenting by subjectivity separates the halves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorspace::{LabPoint, Srgb};
use crate::comparatives::ComparativeTuple;
use crate::data::{pairs_to_tsv, write_embeddings, ColorPair, EmbeddingMatrix};
use crate::error::{Error, Result};

pub const SYNTHETIC_SEED: u64 = 20_240_501;
pub const SYNTHETIC_DIM: usize = 16;
pub const PLANTED: usize = 250;
pub const SCRAMBLED: usize = 250;
/// Planted colors are spread out in direction, since cosine similarity
/// cannot tell apart two Lab vectors pointing the same way.
const MAX_PLANTED_COSINE: f64 = 0.999;

pub const CONCRETENESS_LEXICON: &str = "\
# lemma\tscore
lab\t3.9
velvet\t4.6
dusk\t3.8
moss\t4.9
ocean\t4.9
cloud\t4.8
ember\t4.5
petal\t4.8
storm\t4.5
honey\t4.9
plum\t4.9
smoke\t4.6
green\t4.1
blue\t4.1
red\t4.1
yellow\t4.3
purple\t4.0
grey\t4.0
";

pub const SUBJECTIVITY_LEXICON: &str = "\
# word\tsubjectivity\tmodifier multiplier
dreamy\t0.9
lovely\t0.75
cozy\t0.8
magical\t1.0
gorgeous\t0.9
happy\t1.0
cute\t1.0
perfect\t1.0
very\t0.3\t1.3
really\t0.2\t1.2
";

pub const RULES: &str = "\
# name<TAB>regex; matching descriptions are dropped
url\thttps?://
stretched_vowel\t(?i)(a{4,}|e{4,}|i{4,}|o{4,}|u{4,})
";

const SUBJECTIVE: &[&str] = &["dreamy", "lovely", "cozy", "magical", "gorgeous", "happy", "cute", "perfect"];
const NOUNS: &[&str] = &[
    "velvet", "dusk", "moss", "ocean", "cloud", "ember", "petal", "storm", "honey", "plum", "smoke",
];
const HUES: &[&str] = &["green", "blue", "red", "yellow", "purple", "grey"];

/// Comparative label and the Lab transform from reference to target.
const COMPARATIVES: &[(&str, [f64; 3], f64)] = &[
    ("DARKER", [-25.0, 0.0, 0.0], 1.0),
    ("LIGHTER", [25.0, 0.0, 0.0], 1.0),
    ("REDDER", [0.0, 25.0, 0.0], 1.0),
    ("GREENER", [0.0, -25.0, 0.0], 1.0),
    ("YELLOWER", [0.0, 0.0, 25.0], 1.0),
    ("BLUER", [0.0, 0.0, -25.0], 1.0),
    ("MORE VIVID", [0.0, 0.0, 0.0], 1.6),
    ("DULLER", [0.0, 0.0, 0.0], 0.5),
    ("PALER", [15.0, 0.0, 0.0], 0.6),
    ("DEEPER", [-15.0, 0.0, 0.0], 1.3),
    ("WARMER", [0.0, 10.0, 15.0], 1.0),
    ("COOLER", [0.0, -10.0, -15.0], 1.0),
];

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// All rows, including the ones ingest is expected to drop.
    pub raw_pairs: Vec<ColorPair>,
    /// Rows that survive ingest; these have embeddings.
    pub pairs: Vec<ColorPair>,
    pub embeddings: EmbeddingMatrix,
    pub tuples: Vec<ComparativeTuple>,
}

/// A d×3 matrix with orthonormal columns.
pub fn orthonormal_lift(d: usize, rng: &mut impl Rng) -> Array2<f64> {
    assert!(d >= 3, "lift needs at least 3 dimensions");
    let mut cols: Vec<Array1<f64>> = Vec::new();
    while cols.len() < 3 {
        let mut v = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
        for c in &cols {
            let proj = v.dot(c);
            v.scaled_add(-proj, c);
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            cols.push(v / norm);
        }
    }
    Array2::from_shape_fn((d, 3), |(i, j)| cols[j][i])
}

fn cosine(p: LabPoint, q: LabPoint) -> f64 {
    let (p, q) = (p.to_array(), q.to_array());
    let dot: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (norm(&p) * norm(&q))
}

fn random_color(rng: &mut ChaCha8Rng) -> Srgb {
    Srgb::new(rng.random(), rng.random(), rng.random())
}

fn lift(q: &Array2<f64>, lab: LabPoint) -> Vec<f32> {
    q.dot(&Array1::from(lab.to_array().to_vec())).iter().map(|&v| v as f32).collect()
}

fn shift(p: LabPoint, delta: [f64; 3], chroma: f64) -> LabPoint {
    LabPoint::new(
        (p.l + delta[0]).clamp(0.0, 100.0),
        p.a * chroma + delta[1],
        p.b * chroma + delta[2],
    )
}

fn jitter(p: LabPoint, rng: &mut ChaCha8Rng) -> LabPoint {
    LabPoint::new(
        (p.l + rng.random_range(-2.0..2.0)).clamp(0.0, 100.0),
        p.a + rng.random_range(-2.0..2.0),
        p.b + rng.random_range(-2.0..2.0),
    )
}

/// Three tuples per comparative, each with three reference and three target
/// points around a random base color.
pub fn comparative_tuples(seed: u64) -> Vec<ComparativeTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for &(label, delta, chroma) in COMPARATIVES {
        for _ in 0..3 {
            let base = random_color(&mut rng).to_lab();
            let target = shift(base, delta, chroma);
            let reference = (0..3).map(|_| jitter(base, &mut rng)).collect();
            let target = (0..3).map(|_| jitter(target, &mut rng)).collect();
            out.push(ComparativeTuple::new(label, reference, target).expect("fixture tuple is valid"));
        }
    }
    out
}

fn tags(words: usize, first: &str, rest: &str) -> Vec<String> {
    std::iter::once(first.to_owned())
        .chain(std::iter::repeat_n(rest.to_owned(), words - 1))
        .collect()
}

pub fn synthetic_corpus(seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = orthonormal_lift(SYNTHETIC_DIM, &mut rng);
    let mut pairs = Vec::with_capacity(PLANTED + SCRAMBLED);
    let mut rows = Vec::with_capacity(PLANTED + SCRAMBLED);

    let mut planted: Vec<Srgb> = Vec::with_capacity(PLANTED);
    while planted.len() < PLANTED {
        let color = random_color(&mut rng);
        let lab = color.to_lab();
        if planted.iter().all(|p| cosine(p.to_lab(), lab) < MAX_PLANTED_COSINE) {
            planted.push(color);
        }
    }
    for (i, &color) in planted.iter().enumerate() {
        let lab = color.to_lab();
        let desc = format!("lab {:.0} {:.0} {:.0}", lab.l, lab.a, lab.b);
        let pair = ColorPair::new(format!("planted{i:03}"), color, desc)
            .and_then(|p| p.with_pos_tags(tags(4, "NOUN", "NUM")))
            .expect("fixture pair is valid");
        rows.push(lift(&q, lab));
        pairs.push(pair);
    }

    let mut scrambled = Vec::with_capacity(SCRAMBLED);
    for i in 0..SCRAMBLED {
        let color = random_color(&mut rng);
        let adj = SUBJECTIVE.choose(&mut rng).expect("nonempty");
        let noun = NOUNS.choose(&mut rng).expect("nonempty");
        let desc = match i % 3 {
            0 => format!("{adj} {noun}"),
            1 => format!("very {adj} {noun}"),
            _ => format!("{adj} {noun} {}", HUES.choose(&mut rng).expect("nonempty")),
        };
        let pos = match i % 3 {
            0 => vec!["ADJ".into(), "NOUN".into()],
            1 => vec!["ADV".into(), "ADJ".into(), "NOUN".into()],
            _ => vec!["ADJ".into(), "NOUN".into(), "NOUN".into()],
        };
        let pair = ColorPair::new(format!("scrambled{i:03}"), color, desc)
            .and_then(|p| p.with_pos_tags(pos))
            .expect("fixture pair is valid");
        scrambled.push(pair);
    }
    let mut order: Vec<usize> = (0..SCRAMBLED).collect();
    order.shuffle(&mut rng);
    for (i, pair) in scrambled.iter().enumerate() {
        rows.push(lift(&q, scrambled[order[i]].lab()));
        pairs.push(pair.clone());
    }

    let ids = pairs.iter().map(|p| p.id.clone()).collect();
    let meta: BTreeMap<String, serde_json::Value> = [
        ("source".to_owned(), serde_json::json!("synthetic")),
        ("layer".to_owned(), serde_json::json!("none")),
        ("pooling".to_owned(), serde_json::json!("none")),
        ("seed".to_owned(), serde_json::json!(seed)),
    ]
    .into();
    let embeddings = EmbeddingMatrix::from_rows(ids, &rows)
        .expect("fixture embeddings are valid")
        .with_meta(meta);

    let junk = [
        ("junk0", "a very long six word color name"),
        ("junk1", "one two three four five six seven"),
        ("junk2", "visit https://spam.example now"),
        ("junk3", "sooooooo blue"),
        ("junk4", "http://cheap.example"),
    ];
    let mut raw_pairs = pairs.clone();
    for (k, (id, desc)) in junk.iter().enumerate() {
        let pos = 1 + k * (pairs.len() / junk.len());
        raw_pairs.insert(pos, ColorPair::new(*id, random_color(&mut rng), *desc).expect("fixture pair is valid"));
    }

    SyntheticCorpus {
        raw_pairs,
        pairs,
        embeddings,
        tuples: comparative_tuples(seed.wrapping_add(1)),
    }
}

pub const FIXTURE_FILES: &[&str] = &[
    "pairs.tsv",
    "embeddings.emb",
    "comparatives.jsonl",
    "rules.txt",
    "concreteness.tsv",
    "subjectivity.tsv",
];

/// Writes the corpus and its lexicons into `dir`, returning the paths in
/// `FIXTURE_FILES` order.
pub fn write_synthetic(corpus: &SyntheticCorpus, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| dir.join(name);
    let write = |name: &str, text: &str| -> Result<()> {
        let p = path(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("pairs.tsv", &pairs_to_tsv(&corpus.raw_pairs))?;
    write_embeddings(&corpus.embeddings, &path("embeddings.emb"))?;
    let tuples: String = corpus.tuples.iter().map(|t| t.to_json_line() + "\n").collect();
    write("comparatives.jsonl", &tuples)?;
    write("rules.txt", RULES)?;
    write("concreteness.tsv", CONCRETENESS_LEXICON)?;
    write("subjectivity.tsv", SUBJECTIVITY_LEXICON)?;
    Ok(FIXTURE_FILES.iter().map(|n| path(n)).collect())
}
