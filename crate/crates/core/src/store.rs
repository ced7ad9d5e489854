//! On-disk corpus: a line-delimited JSON record file, an offset index keyed by
//! accession number, and a small key/value metadata file.
//!
//! Layout under `{root}/{name}/`:
//! `records.ndrec` (one JSON record per line, sorted by `ut`),
//! `index` (`ut<TAB>offset<TAB>length`), `meta` (`key=value`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::record::Record;

const RECORDS_FILE: &str = "records.ndrec";
const INDEX_FILE: &str = "index";
const META_FILE: &str = "meta";
const LOCK_FILE: &str = "lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: corrupt record line: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("corpus {0} does not exist")]
    NotFound(PathBuf),
    #[error("corpus {0} is locked by another writer")]
    Locked(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Summary of a stored corpus.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusHandle {
    pub name: String,
    pub record_count: usize,
    pub source_files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct Corpus {
    dir: PathBuf,
    handle: CorpusHandle,
    index: BTreeMap<String, (u64, u64)>,
}

impl Corpus {
    /// Opens `{root}/{name}`, creating an empty corpus if absent.
    pub fn open_or_create(root: &Path, name: &str) -> Result<Self, StoreError> {
        let dir = root.join(name);
        if dir.join(META_FILE).exists() {
            return Self::open_dir(&dir);
        }
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let mut corpus = Corpus {
            dir,
            handle: CorpusHandle {
                name: name.to_string(),
                ..Default::default()
            },
            index: BTreeMap::new(),
        };
        corpus.write_all(&BTreeMap::new())?;
        Ok(corpus)
    }

    pub fn open(root: &Path, name: &str) -> Result<Self, StoreError> {
        Self::open_dir(&root.join(name))
    }

    pub fn open_dir(dir: &Path) -> Result<Self, StoreError> {
        let meta_path = dir.join(META_FILE);
        if !meta_path.exists() {
            return Err(StoreError::NotFound(dir.to_path_buf()));
        }
        let meta = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let mut handle = CorpusHandle::default();
        for line in meta.lines() {
            let Some((k, v)) = line.split_once('=') else { continue };
            match k.trim() {
                "name" => handle.name = v.trim().to_string(),
                "record_count" => handle.record_count = v.trim().parse().unwrap_or(0),
                "source_file" => handle.source_files.push(PathBuf::from(v.trim())),
                _ => {}
            }
        }
        let index_path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&index_path).map_err(io_err(&index_path))?;
        let mut index = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split('\t');
            let parsed = (|| {
                let ut = parts.next()?.to_string();
                let off = parts.next()?.parse().ok()?;
                let len = parts.next()?.parse().ok()?;
                Some((ut, (off, len)))
            })();
            let (ut, pos) = parsed.ok_or_else(|| StoreError::Corrupt {
                path: index_path.clone(),
                line: i + 1,
                message: "bad index entry".into(),
            })?;
            index.insert(ut, pos);
        }
        handle.record_count = index.len();
        Ok(Corpus {
            dir: dir.to_path_buf(),
            handle,
            index,
        })
    }

    pub fn handle(&self) -> &CorpusHandle {
        &self.handle
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, ut: &str) -> bool {
        self.index.contains_key(ut)
    }

    /// Accession numbers in ascending order.
    pub fn uts(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Inserts or replaces records by `ut`. Returns the updated handle.
    pub fn store(
        &mut self,
        records: Vec<Record>,
        source: Option<&Path>,
    ) -> Result<&CorpusHandle, StoreError> {
        if records.is_empty() && source.is_none() {
            return Ok(&self.handle);
        }
        let _lock = WriteLock::acquire(&self.dir)?;
        let mut all: BTreeMap<String, Record> =
            self.iter()?.map(|r| r.map(|r| (r.ut.clone(), r))).collect::<Result<_, _>>()?;
        for r in records {
            all.insert(r.ut.clone(), r);
        }
        if let Some(src) = source {
            if !self.handle.source_files.iter().any(|p| p == src) {
                self.handle.source_files.push(src.to_path_buf());
            }
        }
        self.write_all(&all)?;
        Ok(&self.handle)
    }

    fn write_all(&mut self, all: &BTreeMap<String, Record>) -> Result<(), StoreError> {
        let rec_path = self.dir.join(RECORDS_FILE);
        let tmp_path = self.dir.join(format!("{RECORDS_FILE}.tmp"));
        let mut index = BTreeMap::new();
        {
            let f = File::create(&tmp_path).map_err(io_err(&tmp_path))?;
            let mut w = BufWriter::new(f);
            let mut offset = 0u64;
            for (ut, rec) in all {
                let mut line = serde_json::to_string(rec).expect("record serializes");
                line.push('\n');
                w.write_all(line.as_bytes()).map_err(io_err(&tmp_path))?;
                index.insert(ut.clone(), (offset, line.len() as u64));
                offset += line.len() as u64;
            }
            w.flush().map_err(io_err(&tmp_path))?;
        }
        fs::rename(&tmp_path, &rec_path).map_err(io_err(&rec_path))?;

        let idx_path = self.dir.join(INDEX_FILE);
        let mut idx = String::new();
        for (ut, (off, len)) in &index {
            idx.push_str(&format!("{ut}\t{off}\t{len}\n"));
        }
        fs::write(&idx_path, idx).map_err(io_err(&idx_path))?;

        self.index = index;
        self.handle.record_count = self.index.len();
        let meta_path = self.dir.join(META_FILE);
        let mut meta = format!(
            "name={}\nrecord_count={}\n",
            self.handle.name, self.handle.record_count
        );
        for src in &self.handle.source_files {
            meta.push_str(&format!("source_file={}\n", src.display()));
        }
        fs::write(&meta_path, meta).map_err(io_err(&meta_path))
    }

    /// Random access by accession number through the offset index.
    pub fn get(&self, ut: &str) -> Result<Option<Record>, StoreError> {
        let Some(&(off, len)) = self.index.get(ut) else {
            return Ok(None);
        };
        let path = self.dir.join(RECORDS_FILE);
        let mut f = File::open(&path).map_err(io_err(&path))?;
        f.seek(SeekFrom::Start(off)).map_err(io_err(&path))?;
        let mut buf = vec![0u8; len as usize];
        f.read_exact(&mut buf).map_err(io_err(&path))?;
        serde_json::from_slice(&buf)
            .map(Some)
            .map_err(|e| StoreError::Corrupt {
                path,
                line: 0,
                message: e.to_string(),
            })
    }

    /// Streams all records in `ut` order.
    pub fn iter(&self) -> Result<RecordIter, StoreError> {
        let path = self.dir.join(RECORDS_FILE);
        let f = match File::open(&path) {
            Ok(f) => Some(BufReader::new(f)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(io_err(&path)(e)),
        };
        Ok(RecordIter {
            path,
            reader: f,
            line: 0,
        })
    }

    pub fn load_all(&self) -> Result<Vec<Record>, StoreError> {
        self.iter()?.collect()
    }

    /// Records whose `ut` is in `uts`, in `ut` order.
    pub fn load_subset(&self, uts: &BTreeSet<String>) -> Result<Vec<Record>, StoreError> {
        let mut out = Vec::with_capacity(uts.len());
        for r in self.iter()? {
            let r = r?;
            if uts.contains(&r.ut) {
                out.push(r);
            }
        }
        Ok(out)
    }
}

pub struct RecordIter {
    path: PathBuf,
    reader: Option<BufReader<File>>,
    line: usize,
}

impl Iterator for RecordIter {
    type Item = Result<Record, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        let reader = self.reader.as_mut()?;
        let mut buf = String::new();
        loop {
            buf.clear();
            self.line += 1;
            match reader.read_line(&mut buf) {
                Ok(0) => return None,
                Ok(_) if buf.trim().is_empty() => continue,
                Ok(_) => {
                    return Some(serde_json::from_str(&buf).map_err(|e| StoreError::Corrupt {
                        path: self.path.clone(),
                        line: self.line,
                        message: e.to_string(),
                    }))
                }
                Err(e) => return Some(Err(io_err(&self.path)(e))),
            }
        }
    }
}

struct WriteLock(PathBuf);

impl WriteLock {
    fn acquire(dir: &Path) -> Result<Self, StoreError> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(WriteLock(path)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                Err(StoreError::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for WriteLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Reads a `ut,topic` side file.
pub fn load_topic_map(path: &Path) -> Result<HashMap<String, String>, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((ut, topic)) = line.split_once(',') else {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected ut,topic".into(),
            });
        };
        if i == 0 && ut.trim() == "ut" {
            continue;
        }
        map.insert(ut.trim().to_string(), topic.trim().to_string());
    }
    Ok(map)
}

/// Fills `citation_topic` from a side map; records absent from the map keep
/// their current value.
pub fn apply_topics(records: &mut [Record], topics: &HashMap<String, String>) {
    for r in records {
        if let Some(t) = topics.get(&r.ut) {
            r.citation_topic = Some(t.clone());
        }
    }
}
