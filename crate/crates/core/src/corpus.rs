//! Directory-backed store for queries, image records, blobs and labels.
//!
//! Layout under the store root:
//!
//! ```text
//! store.json              {"format_version":1}
//! manifest.jsonl          one {"kind":"query"|"record", ...} object per line
//! labels.jsonl            append-only label log, last write wins
//! blobs/<ab>/<sha256>     verbatim image bytes, addressed by content hash
//! ```
//!
//! All mutation goes through `&mut Corpus`; callers that share a store across
//! threads must serialize writers themselves (the service wraps it in a lock).

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::text;

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.jsonl";
const LABELS: &str = "labels.jsonl";
const STORE_META: &str = "store.json";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed line: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("invalid record: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A text query and its normalized terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub terms: Vec<String>,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
}

impl Query {
    /// Builds a query from raw text. The id is the normalized terms joined by `-`,
    /// so phrasing variants that normalize identically share one id.
    pub fn new(text: &str) -> Result<Self> {
        let terms = text::query_terms(text);
        if terms.is_empty() {
            return Err(CorpusError::Validation(format!(
                "query {text:?} has no searchable terms"
            )));
        }
        Ok(Self {
            id: terms.join("-"),
            text: text.to_owned(),
            terms,
            extra: Map::new(),
        })
    }
}

/// How a candidate image was discovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    /// Every image embedded in the pages returned by a web search.
    WebSearch,
    /// Image-search hits plus the other images on each hit's origin page.
    ImageSearchSeed,
    /// Image-search hits only.
    DirectImageSearch,
    /// Files ingested from a local directory.
    LocalIngest,
}

/// One candidate image in a query's text-based result list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// Lowercase hex SHA-256 of the blob bytes.
    pub id: String,
    pub query_id: String,
    pub image_url: String,
    #[serde(default)]
    pub page_url: Option<String>,
    pub filename: String,
    #[serde(default)]
    pub alt_text: String,
    #[serde(default)]
    pub surrounding_text: String,
    #[serde(default)]
    pub page_title: String,
    /// 1-based position in the text-based result list.
    pub original_rank: u32,
    pub width: u32,
    pub height: u32,
    pub approach: Approach,
    /// Blob path relative to the store root.
    pub content_ref: String,
    #[serde(flatten, default, skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
}

impl ImageRecord {
    /// A record with empty metadata; `id` and `content_ref` are filled in by
    /// [`Corpus::put_record`].
    pub fn new(query_id: &str, image_url: &str, original_rank: u32, width: u32, height: u32) -> Self {
        Self {
            id: String::new(),
            query_id: query_id.to_owned(),
            image_url: image_url.to_owned(),
            page_url: None,
            filename: crate::acquisition::filename_of(image_url),
            alt_text: String::new(),
            surrounding_text: String::new(),
            page_title: String::new(),
            original_rank,
            width,
            height,
            approach: Approach::LocalIngest,
            content_ref: String::new(),
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Relevant,
    Irrelevant,
    Difficult,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Relevant => "relevant",
            Label::Irrelevant => "irrelevant",
            Label::Difficult => "difficult",
        }
    }
}

impl std::str::FromStr for Label {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relevant" => Ok(Label::Relevant),
            "irrelevant" => Ok(Label::Irrelevant),
            "difficult" => Ok(Label::Difficult),
            other => Err(CorpusError::Validation(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub image_id: String,
    pub query_id: String,
    pub label: Label,
    #[serde(default)]
    pub annotator: String,
    /// UTC seconds since the Unix epoch.
    pub timestamp: u64,
}

impl LabelEntry {
    pub fn now(query_id: &str, image_id: &str, label: Label, annotator: &str) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            image_id: image_id.to_owned(),
            query_id: query_id.to_owned(),
            label,
            annotator: annotator.to_owned(),
            timestamp,
        }
    }
}

/// Summary of the store contents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub queries: Vec<Query>,
    pub record_count: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ManifestLine {
    Query(Query),
    Record(ImageRecord),
}

#[derive(Serialize, Deserialize)]
struct StoreMeta {
    format_version: u32,
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Replays a label log: the last entry per image wins.
pub fn replay_labels<'a>(
    entries: impl IntoIterator<Item = &'a LabelEntry>,
    query_id: &str,
) -> HashMap<String, Label> {
    let mut out = HashMap::new();
    for e in entries {
        if e.query_id == query_id {
            out.insert(e.image_id.clone(), e.label);
        }
    }
    out
}

pub struct Corpus {
    root: PathBuf,
    queries: Vec<Query>,
    records: HashMap<String, Vec<ImageRecord>>,
    labels: Vec<LabelEntry>,
}

impl std::fmt::Debug for Corpus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Corpus")
            .field("root", &self.root)
            .field("queries", &self.queries.len())
            .field("labels", &self.labels.len())
            .finish()
    }
}

impl Corpus {
    /// Opens the store at `root`, creating an empty one if the directory has no
    /// store metadata yet.
    pub fn open_or_create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        if !root.join(STORE_META).exists() {
            fs::create_dir_all(root.join("blobs")).map_err(io_err(root))?;
            let meta = serde_json::to_string(&StoreMeta {
                format_version: FORMAT_VERSION,
            })
            .expect("serializable");
            let path = root.join(STORE_META);
            fs::write(&path, meta + "\n").map_err(io_err(&path))?;
        }
        Self::open(root)
    }

    /// Opens an existing store.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let meta_path = root.join(STORE_META);
        let meta_text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: StoreMeta =
            serde_json::from_str(&meta_text).map_err(|e| CorpusError::Malformed {
                file: STORE_META.into(),
                line: 1,
                message: e.to_string(),
            })?;
        if meta.format_version != FORMAT_VERSION {
            return Err(CorpusError::Validation(format!(
                "unsupported store format_version {}",
                meta.format_version
            )));
        }

        let mut corpus = Corpus {
            root,
            queries: Vec::new(),
            records: HashMap::new(),
            labels: Vec::new(),
        };
        for (line_no, line) in read_lines(&corpus.root.join(MANIFEST))? {
            let parsed: ManifestLine =
                serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                    file: MANIFEST.into(),
                    line: line_no,
                    message: e.to_string(),
                })?;
            match parsed {
                ManifestLine::Query(q) => corpus.index_query(q),
                ManifestLine::Record(r) => corpus.index_record(r),
            }
        }
        for (line_no, line) in read_lines(&corpus.root.join(LABELS))? {
            let entry: LabelEntry =
                serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                    file: LABELS.into(),
                    line: line_no,
                    message: e.to_string(),
                })?;
            corpus.labels.push(entry);
        }
        Ok(corpus)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_query(&mut self, q: Query) {
        self.records.entry(q.id.clone()).or_default();
        match self.queries.iter_mut().find(|e| e.id == q.id) {
            Some(existing) => *existing = q,
            None => self.queries.push(q),
        }
    }

    fn index_record(&mut self, r: ImageRecord) {
        let list = self.records.entry(r.query_id.clone()).or_default();
        match list.iter_mut().find(|e| e.id == r.id) {
            Some(existing) => *existing = r,
            None => list.push(r),
        }
    }

    fn append_line(&self, file: &str, line: &str) -> Result<()> {
        let path = self.root.join(file);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .and_then(|_| f.flush())
            .map_err(io_err(&path))
    }

    /// Registers a query. Re-adding an identical query is a no-op.
    pub fn put_query(&mut self, query: Query) -> Result<()> {
        if query.terms.is_empty() || query.terms.iter().any(String::is_empty) {
            return Err(CorpusError::Validation(format!(
                "query {:?} has invalid terms",
                query.id
            )));
        }
        if self.query(&query.id) == Some(&query) {
            return Ok(());
        }
        let line = serde_json::to_string(&ManifestLine::Query(query.clone())).expect("serializable");
        self.append_line(MANIFEST, &line)?;
        self.index_query(query);
        Ok(())
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }

    /// Stores `blob` under its content hash and appends `record` to the
    /// manifest. `record.id` and `record.content_ref` are overwritten with the
    /// content address. Storing the same blob and record twice is a no-op.
    pub fn put_record(&mut self, mut record: ImageRecord, blob: &[u8]) -> Result<String> {
        if self.query(&record.query_id).is_none() {
            return Err(CorpusError::NotFound(format!("query {}", record.query_id)));
        }
        let (width, height) = decode_dimensions(blob)?;
        if (record.width, record.height) != (width, height) {
            return Err(CorpusError::Validation(format!(
                "record says {}x{} but image is {}x{}",
                record.width, record.height, width, height
            )));
        }
        if record.original_rank == 0 {
            return Err(CorpusError::Validation("original_rank must be >= 1".into()));
        }
        let id = content_hash(blob);
        let list = &self.records[&record.query_id];
        if let Some(clash) = list
            .iter()
            .find(|r| r.original_rank == record.original_rank && r.id != id)
        {
            return Err(CorpusError::Validation(format!(
                "rank {} already taken by image {} in query {}",
                record.original_rank, clash.id, record.query_id
            )));
        }

        let rel = format!("blobs/{}/{}", &id[..2], id);
        record.id = id.clone();
        record.content_ref = rel.clone();

        let path = self.root.join(&rel);
        if !path.exists() {
            let dir = path.parent().expect("blob path has a parent");
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let tmp = path.with_extension("partial");
            fs::write(&tmp, blob).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }

        if list.iter().any(|r| r == &record) {
            return Ok(id);
        }
        let line = serde_json::to_string(&ManifestLine::Record(record.clone())).expect("serializable");
        self.append_line(MANIFEST, &line)?;
        self.index_record(record);
        Ok(id)
    }

    /// Records of a query ordered by `original_rank`.
    pub fn list_records(&self, query_id: &str) -> Result<Vec<ImageRecord>> {
        let list = self
            .records
            .get(query_id)
            .filter(|_| self.query(query_id).is_some())
            .ok_or_else(|| CorpusError::NotFound(format!("query {query_id}")))?;
        let mut out = list.clone();
        out.sort_by_key(|r| r.original_rank);
        Ok(out)
    }

    pub fn record(&self, query_id: &str, image_id: &str) -> Option<&ImageRecord> {
        self.records.get(query_id)?.iter().find(|r| r.id == image_id)
    }

    /// First record (in query order) whose blob has the given id.
    pub fn find_image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.queries
            .iter()
            .filter_map(|q| self.record(&q.id, image_id))
            .next()
    }

    pub fn blob_path(&self, record: &ImageRecord) -> PathBuf {
        self.root.join(&record.content_ref)
    }

    pub fn read_blob(&self, record: &ImageRecord) -> Result<Vec<u8>> {
        let path = self.blob_path(record);
        fs::read(&path).map_err(io_err(&path))
    }

    /// Appends a label. The image must belong to the query.
    pub fn append_label(&mut self, entry: LabelEntry) -> Result<()> {
        if self.record(&entry.query_id, &entry.image_id).is_none() {
            return Err(CorpusError::NotFound(format!(
                "image {} in query {}",
                entry.image_id, entry.query_id
            )));
        }
        let line = serde_json::to_string(&entry).expect("serializable");
        self.append_line(LABELS, &line)?;
        self.labels.push(entry);
        Ok(())
    }

    pub fn label_log(&self) -> &[LabelEntry] {
        &self.labels
    }

    /// Effective label per image of a query, last entry winning.
    pub fn effective_labels(&self, query_id: &str) -> HashMap<String, Label> {
        replay_labels(&self.labels, query_id)
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            format_version: FORMAT_VERSION,
            queries: self.queries.clone(),
            record_count: self
                .queries
                .iter()
                .map(|q| (q.id.clone(), self.records.get(&q.id).map_or(0, Vec::len)))
                .collect(),
        }
    }

    /// Rewrites the manifest without superseded lines. Unknown fields on the
    /// surviving lines are kept.
    pub fn compact(&self) -> Result<()> {
        let path = self.root.join(MANIFEST);
        let tmp = self.root.join("manifest.jsonl.partial");
        let mut out = String::new();
        for q in &self.queries {
            out.push_str(&serde_json::to_string(&ManifestLine::Query(q.clone())).expect("serializable"));
            out.push('\n');
            let mut recs = self.records[&q.id].clone();
            recs.sort_by_key(|r| r.original_rank);
            for r in recs {
                out.push_str(&serde_json::to_string(&ManifestLine::Record(r)).expect("serializable"));
                out.push('\n');
            }
        }
        fs::write(&tmp, out).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Decodes a PNG, JPEG, GIF or BMP blob and returns its pixel dimensions.
pub fn decode_dimensions(blob: &[u8]) -> Result<(u32, u32)> {
    let img = crate::visual::decode(blob).map_err(|e| CorpusError::Decode(e.to_string()))?;
    Ok((img.width(), img.height()))
}
