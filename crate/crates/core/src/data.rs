//! Corpus records, id-aligned matrices and their file formats.
//!
//! Pairs TSV (UTF-8, no header):
//!
//! ```text
//! id<TAB>#RRGGBB<TAB>description[<TAB>POS|POS|...]
//! ```
//!
//! Embedding binary (`EMBV1`): the magic bytes `EMBV1\n`, a little-endian
//! `u32` header length, a UTF-8 JSON header `{"n", "d", "ids", "meta"}`, then
//! `n * d` little-endian `f32` values in row-major order.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::colorspace::{LabPoint, Srgb};
use crate::error::{Error, Result};
use crate::text::word_count;

pub const EMBEDDING_MAGIC: &[u8; 6] = b"EMBV1\n";

/// One crowdsourced (color, description) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorPair {
    pub id: String,
    pub color: Srgb,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tags: Option<Vec<String>>,
}

impl ColorPair {
    pub fn new(id: impl Into<String>, color: Srgb, description: impl Into<String>) -> Result<Self> {
        let pair = ColorPair {
            id: id.into(),
            color,
            description: description.into(),
            pos_tags: None,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn with_pos_tags(mut self, tags: Vec<String>) -> Result<Self> {
        self.pos_tags = Some(tags);
        self.validate()?;
        Ok(self)
    }

    pub fn lab(&self) -> LabPoint {
        self.color.to_lab()
    }

    fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::Validation("pair id is empty".into()));
        }
        if self.id.contains(['\t', '\n', '\r']) {
            return Err(Error::Validation(format!("pair id {:?} contains tab or newline", self.id)));
        }
        if self.description.trim().is_empty() {
            return Err(Error::Validation(format!("pair {}: description is empty", self.id)));
        }
        if self.description.contains(['\t', '\n', '\r']) {
            return Err(Error::Validation(format!(
                "pair {}: description contains tab or newline",
                self.id
            )));
        }
        if let Some(tags) = &self.pos_tags {
            let words = word_count(&self.description);
            if tags.len() != words {
                return Err(Error::Validation(format!(
                    "pair {}: {} POS tags for {} words",
                    self.id,
                    tags.len(),
                    words
                )));
            }
            if tags.iter().any(|t| t.is_empty() || t.contains(['|', '\t'])) {
                return Err(Error::Validation(format!("pair {}: malformed POS tag", self.id)));
            }
        }
        Ok(())
    }

    /// One TSV line, without the trailing newline.
    pub fn to_tsv_line(&self) -> String {
        let mut line = format!("{}\t{}\t{}", self.id, self.color.to_hex(), self.description);
        if let Some(tags) = &self.pos_tags {
            line.push('\t');
            line.push_str(&tags.join("|"));
        }
        line
    }
}

/// A row that could not be parsed, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

/// Result of reading a pairs file: good rows in file order plus the bad ones.
#[derive(Debug, Clone, Default)]
pub struct PairsFile {
    pub pairs: Vec<ColorPair>,
    pub errors: Vec<RowError>,
}

pub fn parse_pair_line(line: &str) -> Result<ColorPair> {
    let fields: Vec<&str> = line.split('\t').collect();
    if !(3..=4).contains(&fields.len()) {
        return Err(Error::Validation(format!(
            "expected 3 or 4 tab-separated fields, found {}",
            fields.len()
        )));
    }
    let color: Srgb = fields[1].trim().parse()?;
    let pair = ColorPair::new(fields[0], color, fields[2])?;
    match fields.get(3) {
        Some(tags) if !tags.trim().is_empty() => {
            pair.with_pos_tags(tags.trim().split('|').map(str::to_owned).collect())
        }
        _ => Ok(pair),
    }
}

/// Parses pairs TSV text. Malformed rows and duplicate ids are collected in
/// `errors`; blank lines are ignored.
pub fn parse_pairs(text: &str) -> PairsFile {
    let mut out = PairsFile::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        match parse_pair_line(raw) {
            Ok(pair) => {
                if seen.insert(pair.id.clone()) {
                    out.pairs.push(pair);
                } else {
                    out.errors.push(RowError {
                        line,
                        message: format!("duplicate id {:?}", pair.id),
                    });
                }
            }
            Err(e) => out.errors.push(RowError {
                line,
                message: e.to_string(),
            }),
        }
    }
    out
}

pub fn read_pairs(path: &Path) -> Result<PairsFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_pairs(&text))
}

pub fn pairs_to_tsv(pairs: &[ColorPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&p.to_tsv_line());
        out.push('\n');
    }
    out
}

pub fn write_pairs(pairs: &[ColorPair], path: &Path) -> Result<()> {
    fs::write(path, pairs_to_tsv(pairs)).map_err(|e| Error::io(path, e))
}

/// Description embeddings, one `f32` row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    dim: usize,
    values: Vec<f32>,
    meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingHeader {
    n: usize,
    d: usize,
    ids: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, serde_json::Value>,
}

impl EmbeddingMatrix {
    pub fn new(ids: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::format("d", "embedding dimension must be positive"));
        }
        if values.len() != ids.len() * dim {
            return Err(Error::format(
                "values",
                format!("{} values for {} rows of dimension {}", values.len(), ids.len(), dim),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                "values",
                format!("non-finite value in row {} ({})", pos / dim, ids[pos / dim]),
            ));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if id.is_empty() {
                return Err(Error::format("ids", "empty id"));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::format("ids", format!("duplicate id {id:?}")));
            }
        }
        Ok(EmbeddingMatrix {
            ids,
            dim,
            values,
            meta: BTreeMap::new(),
        })
    }

    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::format("values", format!("row {bad} has length {}", rows[bad].len())));
        }
        Self::new(ids, dim, rows.concat())
    }

    pub fn with_meta(mut self, meta: BTreeMap<String, serde_json::Value>) -> Self {
        self.meta = meta;
        self
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn meta(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.meta
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), self.dim), |(i, j)| f64::from(self.values[i * self.dim + j]))
    }

    /// Rows whose id is in `keep`, in this matrix's order.
    pub fn subset(&self, keep: &BTreeSet<String>) -> EmbeddingMatrix {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, id) in self.ids.iter().enumerate() {
            if keep.contains(id) {
                ids.push(id.clone());
                values.extend_from_slice(self.row(i));
            }
        }
        EmbeddingMatrix {
            ids,
            dim: self.dim,
            values,
            meta: self.meta.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = EmbeddingHeader {
            n: self.len(),
            d: self.dim,
            ids: self.ids.clone(),
            meta: self.meta.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(EMBEDDING_MAGIC.len() + 4 + header.len() + self.values.len() * 4);
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes
            .strip_prefix(EMBEDDING_MAGIC.as_slice())
            .ok_or_else(|| Error::format("magic", "expected EMBV1 magic bytes"))?;
        if rest.len() < 4 {
            return Err(Error::format("header_len", "file ends before header length"));
        }
        let header_len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        let rest = &rest[4..];
        if rest.len() < header_len {
            return Err(Error::format("header", "header longer than file"));
        }
        let header: EmbeddingHeader = serde_json::from_slice(&rest[..header_len])
            .map_err(|e| Error::format("header", e.to_string()))?;
        if header.ids.len() != header.n {
            return Err(Error::format(
                "n",
                format!("header n={} but {} ids", header.n, header.ids.len()),
            ));
        }
        let payload = &rest[header_len..];
        let expected = header
            .n
            .checked_mul(header.d)
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| Error::format("d", "n·d·4 overflows"))?;
        if payload.len() < expected {
            return Err(Error::format(
                "payload",
                format!("payload shorter than n·d·4 ({} < {expected})", payload.len()),
            ));
        }
        if payload.len() > expected {
            return Err(Error::format(
                "payload",
                format!("payload longer than n·d·4 ({} > {expected})", payload.len()),
            ));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::new(header.ids, header.d, values)?.with_meta(header.meta))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            out.push_str(id);
            for v in self.row(i) {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().to_owned();
            let row = fields
                .map(|f| f.trim().parse::<f32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Row {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            if let Some(first) = rows.first() {
                let first: &Vec<f32> = first;
                if first.len() != row.len() {
                    return Err(Error::Row {
                        line: idx + 1,
                        message: format!("{} values, expected {}", row.len(), first.len()),
                    });
                }
            }
            ids.push(id);
            rows.push(row);
        }
        Self::from_rows(ids, &rows)
    }
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&m.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes)
}

/// Reads either format: `.tsv` files as interchange TSV, anything else as `EMBV1`.
pub fn read_embeddings_any(path: &Path) -> Result<EmbeddingMatrix> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv")) {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        EmbeddingMatrix::from_tsv(&text)
    } else {
        read_embeddings(path)
    }
}

/// CIELAB coordinates, one row per id.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorMatrix {
    ids: Vec<String>,
    values: Vec<[f64; 3]>,
}

impl ColorMatrix {
    pub fn new(ids: Vec<String>, values: Vec<[f64; 3]>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(Error::format("values", "row count differs from id count"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::format("values", "non-finite color coordinate"));
        }
        Ok(ColorMatrix { ids, values })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_array(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), 3), |(i, j)| self.values[i][j])
    }
}

/// Pairs each embedding row with its color, in embedding order. Extra pairs
/// are ignored; embedding ids without a pair are an error.
pub fn join(pairs: &[ColorPair], emb: &EmbeddingMatrix) -> Result<(EmbeddingMatrix, ColorMatrix)> {
    let by_id: HashMap<&str, &ColorPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut missing = Vec::new();
    let mut values = Vec::with_capacity(emb.len());
    for id in emb.ids() {
        match by_id.get(id.as_str()) {
            Some(p) => values.push(p.lab().to_array()),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }
    let colors = ColorMatrix::new(emb.ids().to_vec(), values)?;
    Ok((emb.clone(), colors))
}

/// Where a slice came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ScoreBin {
        score: String,
        index: usize,
        lo: f64,
        hi: f64,
    },
    Cluster {
        space: String,
        k: usize,
        index: usize,
        seed: u64,
        /// Slice this cluster was carved out of, for nested clustering.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parent: Option<String>,
    },
    Filter {
        name: String,
    },
}

/// A named subset of corpus ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSlice {
    pub name: String,
    pub member_ids: BTreeSet<String>,
    pub provenance: Provenance,
}

impl CorpusSlice {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.member_ids.contains(id)
    }
}
