//! Mapping layer: the table of storage locations, selection policies, and the
//! upload/fetch of partitions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::{PartitionSet, StorageError};
use crate::crypto::hash;

/// One row of the location table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEntry {
    pub id: String,
    pub available: bool,
    /// Higher is better.
    pub reputation: f64,
    /// Abstract storage cost; lower is better.
    pub cost: u64,
}

impl LocationEntry {
    pub fn new(id: impl Into<String>) -> Self {
        LocationEntry { id: id.into(), available: true, reputation: 1.0, cost: 1 }
    }
}

/// `L̃`: read-mostly, with availability updates serialized on a write lock.
#[derive(Debug, Default)]
pub struct LocationTable {
    entries: RwLock<Vec<LocationEntry>>,
}

impl LocationTable {
    pub fn new(entries: Vec<LocationEntry>) -> Self {
        LocationTable { entries: RwLock::new(entries) }
    }

    pub fn entries(&self) -> Vec<LocationEntry> {
        self.entries.read().clone()
    }

    /// Entries that may be assigned, in table order.
    pub fn available(&self) -> Vec<LocationEntry> {
        self.entries.read().iter().filter(|e| e.available).cloned().collect()
    }

    pub fn set_available(&self, id: &str, available: bool) {
        if let Some(e) = self.entries.write().iter_mut().find(|e| e.id == id) {
            e.available = available;
        }
    }
}

/// Chooses a location for each partition.
pub trait SelectionPolicy: Send + Sync + fmt::Debug {
    /// Returns `count` ids drawn from `candidates`, which are all available.
    fn select(&self, candidates: &[LocationEntry], count: usize) -> Vec<String>;
}

/// Walks the available entries in table order, wrapping around when there are
/// more partitions than locations.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundRobin;

impl SelectionPolicy for RoundRobin {
    fn select(&self, candidates: &[LocationEntry], count: usize) -> Vec<String> {
        if candidates.is_empty() {
            return Vec::new();
        }
        (0..count).map(|k| candidates[k % candidates.len()].id.clone()).collect()
    }
}

/// Ranks available entries by reputation (descending), then cost
/// (ascending), then id, and walks the ranking with wrap-around.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeightedScore;

impl SelectionPolicy for WeightedScore {
    fn select(&self, candidates: &[LocationEntry], count: usize) -> Vec<String> {
        let mut ranked = candidates.to_vec();
        ranked.sort_by(|a, b| {
            b.reputation
                .total_cmp(&a.reputation)
                .then(a.cost.cmp(&b.cost))
                .then_with(|| a.id.cmp(&b.id))
        });
        RoundRobin.select(&ranked, count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[default]
    RoundRobin,
    Weighted,
}

impl PolicyKind {
    pub fn build(self) -> Box<dyn SelectionPolicy> {
        match self {
            PolicyKind::RoundRobin => Box::new(RoundRobin),
            PolicyKind::Weighted => Box::new(WeightedScore),
        }
    }
}

/// Where one partition lives: `loc://<location-id>/<object-key>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LocationHandle {
    location: String,
    key: String,
}

impl LocationHandle {
    pub fn new(location: impl Into<String>, key: impl Into<String>) -> Self {
        LocationHandle { location: location.into(), key: key.into() }
    }

    pub fn location(&self) -> &str {
        &self.location
    }

    pub fn key(&self) -> &str {
        &self.key
    }
}

impl fmt::Display for LocationHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loc://{}/{}", self.location, self.key)
    }
}

impl FromStr for LocationHandle {
    type Err = StorageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s
            .strip_prefix("loc://")
            .ok_or_else(|| StorageError::MalformedLocations(format!("`{s}` is not a location handle")))?;
        match rest.split_once('/') {
            Some((loc, key)) if !loc.is_empty() && !key.is_empty() => Ok(LocationHandle::new(loc, key)),
            _ => Err(StorageError::MalformedLocations(format!("`{s}` is not a location handle"))),
        }
    }
}

impl TryFrom<String> for LocationHandle {
    type Error = StorageError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<LocationHandle> for String {
    fn from(h: LocationHandle) -> String {
        h.to_string()
    }
}

/// `L`: the handle of `d_k` is at index `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocationSet(pub Vec<LocationHandle>);

impl LocationSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LocationHandle> {
        self.0.iter()
    }
}

/// One storage location: a key/value object store that can be taken offline.
#[derive(Debug)]
pub struct LocationStore {
    id: String,
    up: RwLock<bool>,
    objects: Mutex<HashMap<String, Vec<u8>>>,
}

impl LocationStore {
    pub fn new(id: impl Into<String>) -> Self {
        LocationStore { id: id.into(), up: RwLock::new(true), objects: Mutex::new(HashMap::new()) }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_up(&self) -> bool {
        *self.up.read()
    }

    pub fn set_up(&self, up: bool) {
        *self.up.write() = up;
    }

    /// Stores `bytes` under their digest and returns the key.
    pub fn put(&self, bytes: &[u8]) -> Option<String> {
        if !self.is_up() {
            return None;
        }
        let key = hash(bytes).to_hex();
        self.objects.lock().insert(key.clone(), bytes.to_vec());
        Some(key)
    }

    pub fn get(&self, key: &str) -> Option<Vec<u8>> {
        if !self.is_up() {
            return None;
        }
        self.objects.lock().get(key).cloned()
    }

    /// Overwrites a stored object in place; used for fault injection.
    pub fn corrupt(&self, key: &str, f: impl FnOnce(&mut Vec<u8>)) -> bool {
        match self.objects.lock().get_mut(key) {
            Some(obj) => {
                f(obj);
                true
            }
            None => false,
        }
    }

    pub fn object_count(&self) -> usize {
        self.objects.lock().len()
    }
}

/// All location stores, addressed by id.
#[derive(Debug, Default)]
pub struct LocationPool {
    stores: BTreeMap<String, Arc<LocationStore>>,
}

impl LocationPool {
    pub fn new(ids: impl IntoIterator<Item = impl Into<String>>) -> Self {
        let stores = ids
            .into_iter()
            .map(|id| {
                let s = Arc::new(LocationStore::new(id));
                (s.id().to_string(), s)
            })
            .collect();
        LocationPool { stores }
    }

    pub fn store(&self, id: &str) -> Option<&Arc<LocationStore>> {
        self.stores.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.stores.keys().map(String::as_str)
    }
}

/// Assigns each partition a location through `policy` and uploads it.
///
/// A location that refuses an upload is marked unavailable in the table and
/// the partition is reassigned, up to `max_attempts` tries per partition.
pub fn assign_and_upload(
    set: &PartitionSet,
    table: &LocationTable,
    policy: &dyn SelectionPolicy,
    pool: &LocationPool,
    max_attempts: usize,
) -> Result<LocationSet, StorageError> {
    if !set.is_complete() {
        let missing = (0..set.count()).find(|k| set.get(*k).is_none()).unwrap_or(0);
        return Err(StorageError::MissingPartition(missing));
    }
    let available = table.available();
    if available.is_empty() {
        return Err(StorageError::InsufficientLocations { needed: set.count(), available: 0 });
    }
    let mut assignment = policy.select(&available, set.count());
    let mut handles = Vec::with_capacity(set.count());
    for (k, chunk) in set.iter() {
        let mut attempts = 0;
        loop {
            let loc = assignment[k].clone();
            let key = pool.store(&loc).and_then(|s| s.put(chunk));
            if let Some(key) = key {
                handles.push(LocationHandle::new(loc, key));
                break;
            }
            attempts += 1;
            table.set_available(&loc, false);
            if attempts >= max_attempts {
                return Err(StorageError::UploadFailure { index: k, location: loc });
            }
            let remaining = table.available();
            if remaining.is_empty() {
                return Err(StorageError::InsufficientLocations { needed: set.count(), available: 0 });
            }
            // reassign this and every later partition over what is left
            let reassigned = policy.select(&remaining, set.count() - k);
            assignment.splice(k.., reassigned);
        }
    }
    Ok(LocationSet(handles))
}

/// Fetches every partition named by `locations`, in order.
pub fn fetch(locations: &LocationSet, pool: &LocationPool) -> Result<PartitionSet, StorageError> {
    let mut set = PartitionSet::expecting(locations.len());
    for (k, h) in locations.iter().enumerate() {
        let bytes = pool
            .store(h.location())
            .and_then(|s| s.get(h.key()))
            .ok_or_else(|| StorageError::LocationUnreachable { index: k, location: h.location().to_string() })?;
        set.insert(k, bytes);
    }
    Ok(set)
}
