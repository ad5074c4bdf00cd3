//! Dataset ingestion: quadruple files, vocabularies, reciprocal
//! augmentation and the filter index.

mod cache;
mod filter;
mod stream;
mod synthetic;

pub use cache::{load_cache, save_cache, CACHE_MAGIC};
pub use filter::{build_filter_index, FilterIndex};
pub use stream::BlockShuffleReader;
pub use synthetic::{synthetic_dataset, write_dataset_files, SyntheticSpec};

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One temporal fact as integer ids. Relation ids live in the augmented
/// range [0, 2|R|): ids >= |R| denote inverse relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quadruple {
    pub head: u32,
    pub rel: u32,
    pub tail: u32,
    pub time: u32,
}

impl Quadruple {
    pub fn new(head: u32, rel: u32, tail: u32, time: u32) -> Self {
        Quadruple {
            head,
            rel,
            tail,
            time,
        }
    }

    /// The reciprocal fact (o, r + |R|, s, τ).
    pub fn inverse(self, n_relations: u32) -> Quadruple {
        Quadruple {
            head: self.tail,
            rel: self.rel + n_relations,
            tail: self.head,
            time: self.time,
        }
    }

    /// Direction flip for relation ids anywhere in the augmented range:
    /// base ids gain |R|, inverse ids lose it. An involution.
    pub fn flip(self, n_relations: u32) -> Quadruple {
        let rel = if self.rel < n_relations {
            self.rel + n_relations
        } else {
            self.rel - n_relations
        };
        Quadruple {
            head: self.tail,
            rel,
            tail: self.head,
            time: self.time,
        }
    }
}

/// Bidirectional string <-> id maps for entities, relations and timestamps.
///
/// Entity and relation ids follow first appearance over train, valid, test
/// in that order; timestamp ids are assigned in ascending chronological
/// order (numeric when every stamp parses as an integer, lexicographic
/// otherwise, which orders ISO dates correctly).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entities: Vec<String>,
    entity_ids: HashMap<String, u32>,
    relations: Vec<String>,
    relation_ids: HashMap<String, u32>,
    timestamps: Vec<String>,
    timestamp_ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub(crate) fn from_lists(
        entities: Vec<String>,
        relations: Vec<String>,
        timestamps: Vec<String>,
    ) -> Result<Self> {
        fn index(names: &[String], what: &'static str) -> Result<HashMap<String, u32>> {
            let mut map = HashMap::with_capacity(names.len());
            for (i, n) in names.iter().enumerate() {
                if map.insert(n.clone(), i as u32).is_some() {
                    return Err(Error::Format {
                        path: "<vocabulary>".into(),
                        msg: format!("duplicate {what} symbol `{n}`"),
                    });
                }
            }
            Ok(map)
        }
        let entity_ids = index(&entities, "entity")?;
        let relation_ids = index(&relations, "relation")?;
        let timestamp_ids = index(&timestamps, "timestamp")?;
        Ok(Vocabulary {
            entities,
            entity_ids,
            relations,
            relation_ids,
            timestamps,
            timestamp_ids,
        })
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    /// Base relation count |R| (excluding inverses).
    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn n_timestamps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn entity_id(&self, name: &str) -> Option<u32> {
        self.entity_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: u32) -> Option<&str> {
        self.entities.get(id as usize).map(String::as_str)
    }

    pub fn relation_id(&self, name: &str) -> Option<u32> {
        self.relation_ids.get(name).copied()
    }

    /// Label for a relation id in the augmented range: base names as-is,
    /// inverse ids suffixed.
    pub fn relation_label(&self, id: u32) -> Option<String> {
        let n = self.relations.len() as u32;
        if id < n {
            self.relations.get(id as usize).cloned()
        } else {
            self.relations
                .get((id - n) as usize)
                .map(|r| format!("{r}^-1"))
        }
    }

    pub fn timestamp_id(&self, name: &str) -> Option<u32> {
        self.timestamp_ids.get(name).copied()
    }

    pub fn timestamp_name(&self, id: u32) -> Option<&str> {
        self.timestamps.get(id as usize).map(String::as_str)
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entities
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relations
    }

    pub fn timestamp_names(&self) -> &[String] {
        &self.timestamps
    }
}

/// A loaded dataset: vocabulary plus the three id-encoded splits
/// (unaugmented; relation ids < |R|).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub vocab: Vocabulary,
    pub train: Vec<Quadruple>,
    pub valid: Vec<Quadruple>,
    pub test: Vec<Quadruple>,
    /// Non-fatal issues encountered while loading (blank lines etc.).
    pub warnings: Vec<String>,
}

impl Dataset {
    /// Table sizes implied by this dataset at embedding dimension `d`.
    pub fn dims(&self, d: usize) -> crate::model::Dims {
        crate::model::Dims {
            d,
            n_entities: self.vocab.n_entities(),
            n_relations: self.vocab.n_relations(),
            n_timestamps: self.vocab.n_timestamps(),
        }
    }

    /// All splits concatenated (train, valid, test order).
    pub fn all_facts(&self) -> impl Iterator<Item = &Quadruple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

fn split_path(dir: &Path, stem: &str) -> Result<PathBuf> {
    let bare = dir.join(stem);
    if bare.is_file() {
        return Ok(bare);
    }
    let txt = dir.join(format!("{stem}.txt"));
    if txt.is_file() {
        return Ok(txt);
    }
    Err(Error::io(
        format!("dataset split `{stem}` in {}", dir.display()),
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no file named `{stem}` or `{stem}.txt`"),
        ),
    ))
}

/// Visit every well-formed line of one split file.
fn scan_file<F>(path: &Path, warnings: &mut Vec<String>, mut f: F) -> Result<()>
where
    F: FnMut(&str, &str, &str, &str) -> Result<()>,
{
    let file =
        File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let reader = BufReader::new(file);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            warnings.push(format!("{}:{}: blank line skipped", path.display(), lineno));
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(h), Some(r), Some(t), Some(tau)) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: "expected 4 tab-separated fields".into(),
            });
        };
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: "more than 4 tab-separated fields".into(),
            });
        }
        let (h, r, t, tau) = (h.trim(), r.trim(), t.trim(), tau.trim());
        if h.is_empty() || r.is_empty() || t.is_empty() || tau.is_empty() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: "empty field".into(),
            });
        }
        f(h, r, t, tau)?;
    }
    Ok(())
}

/// Load train/valid/test quadruple files from a directory and build the
/// vocabulary over their union.
pub fn load_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    let paths = [
        split_path(dir, "train")?,
        split_path(dir, "valid")?,
        split_path(dir, "test")?,
    ];
    let mut warnings = Vec::new();

    // First pass: symbol discovery in fixed order.
    let mut entities: Vec<String> = Vec::new();
    let mut entity_ids: HashMap<String, u32> = HashMap::new();
    let mut relations: Vec<String> = Vec::new();
    let mut relation_ids: HashMap<String, u32> = HashMap::new();
    let mut stamp_set: HashMap<String, ()> = HashMap::new();
    {
        let intern_entity = |s: &str,
                                 entities: &mut Vec<String>,
                                 ids: &mut HashMap<String, u32>| {
            if !ids.contains_key(s) {
                ids.insert(s.to_string(), entities.len() as u32);
                entities.push(s.to_string());
            }
        };
        for path in &paths {
            scan_file(path, &mut warnings, |h, r, t, tau| {
                intern_entity(h, &mut entities, &mut entity_ids);
                intern_entity(t, &mut entities, &mut entity_ids);
                if !relation_ids.contains_key(r) {
                    relation_ids.insert(r.to_string(), relations.len() as u32);
                    relations.push(r.to_string());
                }
                stamp_set.entry(tau.to_string()).or_insert(());
                Ok(())
            })?;
        }
    }

    // Timestamps in chronological order.
    let mut timestamps: Vec<String> = stamp_set.into_keys().collect();
    let all_numeric = timestamps.iter().all(|s| s.parse::<i64>().is_ok());
    if all_numeric {
        timestamps.sort_by_key(|s| s.parse::<i64>().expect("checked numeric"));
    } else {
        timestamps.sort();
    }
    let timestamp_ids: HashMap<String, u32> = timestamps
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();

    // Second pass: encode.
    let mut splits: Vec<Vec<Quadruple>> = Vec::with_capacity(3);
    for path in &paths {
        let mut quads = Vec::new();
        scan_file(path, &mut warnings, |h, r, t, tau| {
            quads.push(Quadruple {
                head: entity_ids[h],
                rel: relation_ids[r],
                tail: entity_ids[t],
                time: timestamp_ids[tau],
            });
            Ok(())
        })?;
        splits.push(quads);
    }
    let test = splits.pop().expect("three splits");
    let valid = splits.pop().expect("three splits");
    let train = splits.pop().expect("three splits");

    Ok(Dataset {
        name: name.to_string(),
        vocab: Vocabulary::from_lists(entities, relations, timestamps)?,
        train,
        valid,
        test,
        warnings,
    })
}

/// Reciprocal augmentation: each (s, r, o, τ) is followed by
/// (o, r + |R|, s, τ). Output length is exactly twice the input length.
pub fn augment_reciprocal(facts: &[Quadruple], n_relations: u32) -> Result<Vec<Quadruple>> {
    let mut out = Vec::with_capacity(facts.len() * 2);
    for f in facts {
        if f.rel >= n_relations {
            return Err(Error::AlreadyAugmented {
                rel: f.rel,
                num_relations: n_relations,
            });
        }
        out.push(*f);
        out.push(f.inverse(n_relations));
    }
    Ok(out)
}
