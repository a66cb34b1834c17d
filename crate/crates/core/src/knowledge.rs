//! Curated knowledge base: word-window chunking, an exact cosine index and
//! Markdown corpus ingest.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cultural::Tag;
use crate::gateway::{Embedding, Gateway, GatewayError};

pub const DEFAULT_CHUNK_MAX: usize = 300;
pub const DEFAULT_OVERLAP: usize = 50;
pub const DEFAULT_K: usize = 4;

const INDEX_FORMAT: &str = "saathi-kb";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("overlap ({overlap}) must be smaller than chunk_max ({chunk_max})")]
    BadChunking { chunk_max: usize, overlap: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("duplicate chunk id `{0}`")]
    DuplicateId(String),
    #[error("embedding dimension {found} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("chunk `{0}` embedding is not unit-norm")]
    NotUnitNorm(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {message}")]
    Corpus { path: PathBuf, message: String },
    #[error("index file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A word window of a source document, before embedding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    pub ordinal: usize,
}

/// Splits `text` into windows of at most `chunk_max` words, consecutive
/// windows sharing `overlap` words.
pub fn chunk_document(doc_id: &str, text: &str, chunk_max: usize, overlap: usize) -> Result<Vec<TextChunk>, KnowledgeError> {
    if chunk_max == 0 || overlap >= chunk_max {
        return Err(KnowledgeError::BadChunking { chunk_max, overlap });
    }
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        tracing::warn!(doc_id, "document is empty, no chunks produced");
        return Ok(Vec::new());
    }
    let stride = chunk_max - overlap;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + chunk_max).min(words.len());
        let ordinal = out.len();
        out.push(TextChunk {
            chunk_id: format!("{doc_id}#{ordinal}"),
            doc_id: doc_id.to_string(),
            text: words[start..end].join(" "),
            ordinal,
        });
        if end == words.len() {
            return Ok(out);
        }
        start += stride;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    pub embedding: Embedding,
    pub tags: BTreeSet<Tag>,
    pub ordinal: usize,
}

impl KnowledgeChunk {
    pub fn embed(chunk: TextChunk, tags: BTreeSet<Tag>, gateway: &dyn Gateway) -> Result<Self, KnowledgeError> {
        let embedding = gateway.embed(&chunk.text)?;
        Ok(KnowledgeChunk {
            chunk_id: chunk.chunk_id,
            doc_id: chunk.doc_id,
            text: chunk.text,
            embedding,
            tags,
            ordinal: chunk.ordinal,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_id: String,
    pub similarity: f64,
    pub rank: usize,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct IndexData {
    dimension: Option<usize>,
    chunks: Vec<KnowledgeChunk>,
    #[serde(skip)]
    ids: HashMap<String, usize>,
}

impl IndexData {
    fn rebuild_ids(&mut self) -> Result<(), KnowledgeError> {
        self.ids.clear();
        for (i, c) in self.chunks.iter().enumerate() {
            if self.ids.insert(c.chunk_id.clone(), i).is_some() {
                return Err(KnowledgeError::DuplicateId(c.chunk_id.clone()));
            }
        }
        Ok(())
    }
}

/// Read-only view of the index at one point in time.
#[derive(Debug, Clone)]
pub struct IndexSnapshot(Arc<IndexData>);

impl IndexSnapshot {
    pub fn len(&self) -> usize {
        self.0.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.chunks.is_empty()
    }

    pub fn get(&self, chunk_id: &str) -> Option<&KnowledgeChunk> {
        self.0.ids.get(chunk_id).map(|&i| &self.0.chunks[i])
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.0.chunks
    }

    /// Exact top-k by cosine similarity; ties keep insertion order.
    pub fn search(&self, query: &Embedding, k: usize, tag_filter: Option<&BTreeSet<Tag>>) -> Result<Vec<RetrievalResult>, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::ZeroK);
        }
        if let Some(d) = self.0.dimension {
            if d != query.dimension() {
                return Err(KnowledgeError::DimensionMismatch { expected: d, found: query.dimension() });
            }
        }
        let mut scored: Vec<(usize, f64)> = self
            .0
            .chunks
            .iter()
            .enumerate()
            .filter(|(_, c)| tag_filter.is_none_or(|f| c.tags.iter().any(|t| f.contains(t))))
            .map(|(i, c)| (i, cosine(&c.embedding.values, &query.values)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(r, (i, s))| RetrievalResult {
                chunk_id: self.0.chunks[i].chunk_id.clone(),
                similarity: s,
                rank: r + 1,
            })
            .collect())
    }
}

/// Exhaustive in-memory vector index. Readers work on snapshots, so a
/// search that started before a write never observes it.
#[derive(Debug, Default)]
pub struct KnowledgeIndex {
    inner: RwLock<Arc<IndexData>>,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    data: IndexData,
}

impl KnowledgeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> IndexSnapshot {
        IndexSnapshot(self.inner.read().expect("index lock poisoned").clone())
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> Option<usize> {
        self.inner.read().expect("index lock poisoned").dimension
    }

    pub fn get(&self, chunk_id: &str) -> Option<KnowledgeChunk> {
        self.snapshot().get(chunk_id).cloned()
    }

    pub fn add(&self, chunk: KnowledgeChunk) -> Result<(), KnowledgeError> {
        if (chunk.embedding.norm() - 1.0).abs() > 1e-6 {
            return Err(KnowledgeError::NotUnitNorm(chunk.chunk_id));
        }
        let mut guard = self.inner.write().expect("index lock poisoned");
        let data = Arc::make_mut(&mut guard);
        let dim = chunk.embedding.dimension();
        match data.dimension {
            Some(d) if d != dim => return Err(KnowledgeError::DimensionMismatch { expected: d, found: dim }),
            _ => data.dimension = Some(dim),
        }
        if data.ids.contains_key(&chunk.chunk_id) {
            return Err(KnowledgeError::DuplicateId(chunk.chunk_id));
        }
        data.ids.insert(chunk.chunk_id.clone(), data.chunks.len());
        data.chunks.push(chunk);
        Ok(())
    }

    pub fn search(&self, query: &Embedding, k: usize, tag_filter: Option<&BTreeSet<Tag>>) -> Result<Vec<RetrievalResult>, KnowledgeError> {
        self.snapshot().search(query, k, tag_filter)
    }

    /// Embeds `query_text` and returns the top-k matches.
    pub fn retrieve(
        &self,
        gateway: &dyn Gateway,
        query_text: &str,
        k: usize,
        tag_filter: Option<&BTreeSet<Tag>>,
    ) -> Result<Vec<RetrievalResult>, KnowledgeError> {
        let snap = self.snapshot();
        if snap.is_empty() {
            return Ok(Vec::new());
        }
        let q = gateway.embed(query_text)?;
        snap.search(&q, k, tag_filter)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), KnowledgeError> {
        let snap = self.snapshot();
        let file = IndexFile {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            data: (*snap.0).clone(),
        };
        let json = serde_json::to_string(&file).map_err(|e| KnowledgeError::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KnowledgeError> {
        let text = std::fs::read_to_string(path)?;
        let mut file: IndexFile = serde_json::from_str(&text).map_err(|e| KnowledgeError::Format(e.to_string()))?;
        if file.format != INDEX_FORMAT || file.version != INDEX_VERSION {
            return Err(KnowledgeError::Format(format!(
                "unsupported index header {} v{}",
                file.format, file.version
            )));
        }
        file.data.rebuild_ids()?;
        Ok(KnowledgeIndex { inner: RwLock::new(Arc::new(file.data)) })
    }
}

/// One corpus file after front-matter parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub tags: BTreeSet<Tag>,
    pub text: String,
}

#[derive(Deserialize)]
struct FrontMatter {
    doc_id: Option<String>,
    #[serde(default)]
    tags: Vec<String>,
}

/// Parses a Markdown/text document with an optional `---` YAML header.
pub fn parse_document(path: &Path, raw: &str) -> Result<Document, KnowledgeError> {
    let corpus_err = |message: String| KnowledgeError::Corpus { path: path.to_path_buf(), message };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("doc").to_string();
    let raw = raw.trim_start_matches('\u{feff}');
    let Some(rest) = raw.strip_prefix("---").filter(|r| r.starts_with('\n') || r.starts_with("\r\n")) else {
        return Ok(Document { doc_id: stem, tags: BTreeSet::new(), text: raw.to_string() });
    };
    let end = rest.find("\n---").ok_or_else(|| corpus_err("front matter is not closed".into()))?;
    let header: FrontMatter = serde_yaml::from_str(&rest[..end]).map_err(|e| corpus_err(e.to_string()))?;
    let body = rest[end + 4..].split_once('\n').map(|(_, b)| b).unwrap_or("");
    let tags = header
        .tags
        .iter()
        .map(|t| t.parse::<Tag>().map_err(|e| corpus_err(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(Document {
        doc_id: header.doc_id.unwrap_or(stem),
        tags,
        text: body.to_string(),
    })
}

/// Reads every `.md` and `.txt` file in `dir`, sorted by file name.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Vec<Document>, KnowledgeError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("md" | "txt")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| parse_document(p, &std::fs::read_to_string(p)?))
        .collect()
}

/// Chunks, embeds and indexes documents in order.
pub fn build_index(
    gateway: &dyn Gateway,
    docs: &[Document],
    chunk_max: usize,
    overlap: usize,
) -> Result<KnowledgeIndex, KnowledgeError> {
    let index = KnowledgeIndex::new();
    for doc in docs {
        for chunk in chunk_document(&doc.doc_id, &doc.text, chunk_max, overlap)? {
            index.add(KnowledgeChunk::embed(chunk, doc.tags.clone(), gateway)?)?;
        }
    }
    Ok(index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cultural::Dimension;
    use crate::gateway::MockGateway;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn chunk_stride_arithmetic() {
        let chunks = chunk_document("d", &words(700), 300, 50).unwrap();
        let ranges: Vec<(String, String)> = chunks
            .iter()
            .map(|c| {
                let w: Vec<&str> = c.text.split(' ').collect();
                (w[0].to_string(), w[w.len() - 1].to_string())
            })
            .collect();
        assert_eq!(ranges, [("w0".into(), "w299".into()), ("w250".into(), "w549".into()), ("w500".into(), "w699".into())]);
        assert_eq!(chunks.iter().map(|c| c.ordinal).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(chunks[2].chunk_id, "d#2");
    }

    #[test]
    fn chunk_edge_cases() {
        let one = chunk_document("d", &words(10), 300, 50).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].text, words(10));
        assert!(chunk_document("d", "   ", 300, 50).unwrap().is_empty());
        assert!(matches!(chunk_document("d", "a", 50, 50), Err(KnowledgeError::BadChunking { .. })));
    }

    #[test]
    fn add_get_and_reject() {
        let g = MockGateway::new(7, 32);
        let index = KnowledgeIndex::new();
        let c = KnowledgeChunk::embed(chunk_document("d", "copper t", 300, 50).unwrap().remove(0), BTreeSet::new(), &g).unwrap();
        index.add(c.clone()).unwrap();
        assert_eq!(index.get("d#0"), Some(c.clone()));
        assert!(matches!(index.add(c.clone()), Err(KnowledgeError::DuplicateId(_))));
        let mut other = c;
        other.chunk_id = "x".into();
        other.embedding = Embedding::normalized(vec![1.0; 8]).unwrap();
        assert!(matches!(index.add(other), Err(KnowledgeError::DimensionMismatch { expected: 32, found: 8 })));
    }

    #[test]
    fn exact_text_ranks_first_and_filter_applies() {
        let g = MockGateway::new(7, 256);
        let texts = ["Condoms prevent pregnancy and infections", "Copper-T is a long acting device", "Vasectomy is a minor operation"];
        let index = KnowledgeIndex::new();
        for (i, t) in texts.iter().enumerate() {
            let tags = if i == 2 { BTreeSet::from([Tag(Dimension::MedicalConsensus)]) } else { BTreeSet::new() };
            index.add(KnowledgeChunk::embed(chunk_document(&format!("d{i}"), t, 300, 50).unwrap().remove(0), tags, &g).unwrap()).unwrap();
        }
        let r = index.retrieve(&g, texts[1], 10, None).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r[0].chunk_id, "d1#0");
        assert!((r[0].similarity - 1.0).abs() < 1e-9);
        let filter = BTreeSet::from([Tag(Dimension::MedicalConsensus)]);
        let f = index.retrieve(&g, texts[1], 10, Some(&filter)).unwrap();
        assert_eq!(f.iter().map(|r| r.chunk_id.as_str()).collect::<Vec<_>>(), ["d2#0"]);
        assert!(KnowledgeIndex::new().retrieve(&g, "x", 4, None).unwrap().is_empty());
    }

    #[test]
    fn snapshot_isolated_from_later_writes() {
        let g = MockGateway::new(1, 16);
        let index = KnowledgeIndex::new();
        index.add(KnowledgeChunk::embed(chunk_document("a", "one", 10, 0).unwrap().remove(0), BTreeSet::new(), &g).unwrap()).unwrap();
        let snap = index.snapshot();
        index.add(KnowledgeChunk::embed(chunk_document("b", "two", 10, 0).unwrap().remove(0), BTreeSet::new(), &g).unwrap()).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(index.len(), 2);
    }

    #[test]
    fn front_matter_parsing() {
        let raw = "---\ndoc_id: consent\ntags: [Societal/LawsAndRegulations]\n---\nAge of consent is 18.\n";
        let d = parse_document(Path::new("x.md"), raw).unwrap();
        assert_eq!(d.doc_id, "consent");
        assert_eq!(d.tags, BTreeSet::from([Tag(Dimension::LawsAndRegulations)]));
        assert_eq!(d.text, "Age of consent is 18.\n");
        let bad = "---\ntags: [Regional/Religion]\n---\nx";
        assert!(parse_document(Path::new("y.md"), bad).is_err());
        assert_eq!(parse_document(Path::new("plain.txt"), "hi").unwrap().doc_id, "plain");
    }
}
