use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-user implicit-feedback histories over a dense item catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionStore {
    num_items: usize,
    /// Per user, `(item, timestamp)` sorted by timestamp then item.
    users: Vec<Vec<(usize, i64)>>,
}

impl InteractionStore {
    /// Builds a store, sorting each list by `(timestamp, item)`.
    pub fn new(num_items: usize, mut users: Vec<Vec<(usize, i64)>>) -> Result<Self> {
        for (u, list) in users.iter_mut().enumerate() {
            if list.is_empty() {
                return Err(Error::invalid(format!("user {u} has no interactions")));
            }
            if let Some(&(i, _)) = list.iter().find(|(i, _)| *i >= num_items) {
                return Err(Error::invalid(format!(
                    "user {u} references item {i} outside catalog of {num_items}"
                )));
            }
            list.sort_unstable_by_key(|&(i, t)| (t, i));
        }
        Ok(Self { num_items, users })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn user(&self, u: usize) -> &[(usize, i64)] {
        &self.users[u]
    }

    /// Item ids of user `u` in their stored order.
    pub fn items_of(&self, u: usize) -> Vec<usize> {
        self.users[u].iter().map(|&(i, _)| i).collect()
    }

    pub fn num_interactions(&self) -> usize {
        self.users.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[(usize, i64)])> {
        self.users.iter().enumerate().map(|(u, l)| (u, l.as_slice()))
    }
}

/// Mapping from external ids to dense indices, ascending by external id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    external: Vec<u64>,
}

impl IdMap {
    pub fn identity(n: usize) -> Self {
        Self {
            external: (0..n as u64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }

    pub fn external(&self, dense: usize) -> u64 {
        self.external[dense]
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.external.len() * 12);
        for (dense, ext) in self.external.iter().enumerate() {
            out.push_str(&format!("{ext}\t{dense}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// A parsed interactions file with its id maps.
#[derive(Debug, Clone)]
pub struct LoadedInteractions {
    pub store: InteractionStore,
    pub users: IdMap,
    pub items: IdMap,
}

impl LoadedInteractions {
    /// Writes `<stem>.users.idmap.tsv` and `<stem>.items.idmap.tsv` next to `data_path`.
    pub fn write_id_maps(&self, data_path: &Path) -> Result<()> {
        let stem = data_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "interactions".into());
        let dir = data_path.parent().unwrap_or(Path::new("."));
        self.users
            .write_tsv(&dir.join(format!("{stem}.users.idmap.tsv")))?;
        self.items
            .write_tsv(&dir.join(format!("{stem}.items.idmap.tsv")))
    }
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: Option<&str>,
    what: &str,
) -> Result<T> {
    let raw = field.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: format!("missing {what}"),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        detail: format!("bad {what} `{raw}`"),
    })
}

/// Loads a `user<TAB>item<TAB>timestamp` file, compacting both id spaces.
pub fn load_interactions(path: &Path) -> Result<LoadedInteractions> {
    load_interactions_inner(path, None)
}

/// Like [`load_interactions`], but item ids index a fixed catalog of
/// `catalog_size` items (the rows of a feature file) and are not compacted.
pub fn load_interactions_with_catalog(
    path: &Path,
    catalog_size: usize,
) -> Result<LoadedInteractions> {
    load_interactions_inner(path, Some(catalog_size))
}

fn load_interactions_inner(path: &Path, catalog: Option<usize>) -> Result<LoadedInteractions> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;

    // (user, item) -> earliest timestamp
    let mut raw: BTreeMap<u64, HashMap<u64, i64>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let user: u64 = parse_field(path, lineno, fields.next(), "user id")?;
        let item: u64 = parse_field(path, lineno, fields.next(), "item id")?;
        let ts: i64 = parse_field(path, lineno, fields.next(), "timestamp")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                detail: "expected exactly three tab-separated fields".into(),
            });
        }
        if let Some(m) = catalog {
            if item >= m as u64 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    detail: format!("item {item} outside catalog of {m}"),
                });
            }
        }
        raw.entry(user)
            .or_default()
            .entry(item)
            .and_modify(|t| *t = (*t).min(ts))
            .or_insert(ts);
    }

    raw.retain(|_, items| items.len() >= 2);
    if raw.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{}: no user has at least two distinct interactions",
            path.display()
        )));
    }

    let (item_map, dense_item): (IdMap, Box<dyn Fn(u64) -> usize>) = match catalog {
        Some(m) => (IdMap::identity(m), Box::new(|i| i as usize)),
        None => {
            let mut ids: Vec<u64> = raw.values().flat_map(|m| m.keys().copied()).collect();
            ids.sort_unstable();
            ids.dedup();
            let lookup: HashMap<u64, usize> =
                ids.iter().enumerate().map(|(d, &e)| (e, d)).collect();
            (IdMap { external: ids }, Box::new(move |i| lookup[&i]))
        }
    };

    let user_map = IdMap {
        external: raw.keys().copied().collect(),
    };
    let lists = raw
        .values()
        .map(|items| items.iter().map(|(&i, &t)| (dense_item(i), t)).collect())
        .collect();
    let store = InteractionStore::new(item_map.len(), lists)?;
    Ok(LoadedInteractions {
        store,
        users: user_map,
        items: item_map,
    })
}

/// Writes a store in the interactions TSV format using dense ids.
pub fn write_interactions(path: &Path, store: &InteractionStore) -> Result<()> {
    let mut buf = Vec::with_capacity(store.num_interactions() * 16);
    for (u, list) in store.iter() {
        for &(i, t) in list {
            writeln!(buf, "{u}\t{i}\t{t}").expect("write to Vec");
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("x.tsv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn compacts_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "0\t5\t100\n0\t7\t200\n");
        let l = load_interactions(&p).unwrap();
        assert_eq!(l.store.num_users(), 1);
        assert_eq!(l.store.num_items(), 2);
        assert_eq!(l.store.user(0), &[(0, 100), (1, 200)]);
        assert_eq!(l.items.external(1), 7);
    }

    #[test]
    fn single_interaction_user_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "3\t1\t10\n");
        assert!(matches!(load_interactions(&p), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "0\t1\t1\n0\tx\t2\n");
        match load_interactions(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_keep_earliest_timestamp() {
        let rows = [(1u64, 4u64, 50i64), (1, 4, 20), (1, 9, 30), (1, 4, 70), (2, 9, 1), (2, 9, 0), (2, 3, 5)];
        let body: String = rows.iter().map(|(u, i, t)| format!("{u}\t{i}\t{t}\n")).collect();
        let dir = tempfile::tempdir().unwrap();
        let l = load_interactions(&write(&dir, &body)).unwrap();

        // Oracle: minimum timestamp per pair over the raw list.
        let mut oracle: BTreeMap<(u64, u64), i64> = BTreeMap::new();
        for &(u, i, t) in &rows {
            let e = oracle.entry((u, i)).or_insert(t);
            *e = (*e).min(t);
        }
        let mut got = BTreeMap::new();
        for (u, list) in l.store.iter() {
            for &(i, t) in list {
                got.insert((l.users.external(u), l.items.external(i)), t);
            }
        }
        assert_eq!(got, oracle);
    }

    #[test]
    fn catalog_mode_keeps_item_ids() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "0\t5\t100\n0\t7\t200\n");
        let l = load_interactions_with_catalog(&p, 10).unwrap();
        assert_eq!(l.store.num_items(), 10);
        assert_eq!(l.store.user(0), &[(5, 100), (7, 200)]);
        assert!(load_interactions_with_catalog(&p, 6).is_err());
    }

    #[test]
    fn id_maps_written_next_to_data() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "9\t5\t1\n9\t7\t2\n");
        let l = load_interactions(&p).unwrap();
        l.write_id_maps(&p).unwrap();
        let items = fs::read_to_string(dir.path().join("x.items.idmap.tsv")).unwrap();
        assert_eq!(items, "5\t0\n7\t1\n");
        let users = fs::read_to_string(dir.path().join("x.users.idmap.tsv")).unwrap();
        assert_eq!(users, "9\t0\n");
    }
}
