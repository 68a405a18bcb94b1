//! Storage backends: decentralized, self-hosted, and the public staging space.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::{
    assemble, assign_and_upload, fetch, parse_locations, partition, record_locations, LocationPool,
    LocationTable, PartitionSet, SelectionPolicy, StorageError,
};
use crate::canonical;
use crate::crypto::{
    hash, AsymmetricKeyPair, CryptoProvider, DecryptionKey, EncryptionKey, SymmetricKey, WalletAddress,
};
use crate::ledger::{Ledger, TxId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Decentralized,
    SelfHosted,
    Staging,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Decentralized => "decentralized",
            BackendKind::SelfHosted => "self-hosted",
            BackendKind::Staging => "staging",
        })
    }
}

/// Enough to find stored data again.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum StoredRef {
    /// The `τ_l` recording the location set.
    Decentralized { tx: TxId },
    /// Two objects on a host: the data sealed under a fresh key, and that key
    /// wrapped for the owner.
    SelfHosted { host: String, data: String, key: String },
}

/// Backends store and load whole data blobs for one owner.
pub trait StorageBackend: Send + Sync + fmt::Debug {
    fn kind(&self) -> BackendKind;
    fn store(&self, data: &[u8]) -> Result<StoredRef, StorageError>;
    fn load(&self, r: &StoredRef) -> Result<Vec<u8>, StorageError>;
}

/// Partition, map, and chain layers composed for one owner.
///
/// Partitions are sealed with the owner's storage key before upload unless
/// `partition_key` is `None`; the location set is sealed with `location_key`
/// when present.
#[derive(Debug)]
pub struct DecentralizedStorage {
    pub ledger: Arc<Ledger>,
    pub provider: Arc<dyn CryptoProvider>,
    pub table: Arc<LocationTable>,
    pub pool: Arc<LocationPool>,
    pub policy: Box<dyn SelectionPolicy>,
    pub gamma: f64,
    pub owner: WalletAddress,
    pub partition_key: Option<SymmetricKey>,
    pub location_key: Option<SymmetricKey>,
    pub max_attempts: usize,
}

impl DecentralizedStorage {
    pub fn seal_partitions(&self, set: &PartitionSet) -> PartitionSet {
        match &self.partition_key {
            None => set.clone(),
            Some(k) => PartitionSet::from_ordered(
                set.iter()
                    .map(|(_, c)| self.provider.encrypt(c, EncryptionKey::Symmetric(k)).to_bytes())
                    .collect(),
            ),
        }
    }

    pub fn open_partitions(&self, set: &PartitionSet) -> Result<PartitionSet, StorageError> {
        open_partitions(set, self.partition_key.as_ref())
    }
}

/// Decrypts each sealed partition; with no key the set is returned as is.
pub fn open_partitions(set: &PartitionSet, key: Option<&SymmetricKey>) -> Result<PartitionSet, StorageError> {
    let Some(k) = key else {
        return Ok(set.clone());
    };
    let mut out = PartitionSet::expecting(set.count());
    for (i, c) in set.iter() {
        let plain = crate::crypto::decrypt_bytes(c, DecryptionKey::Symmetric(k))
            .map_err(|_| StorageError::DecryptionFailure)?;
        out.insert(i, plain);
    }
    Ok(out)
}

impl StorageBackend for DecentralizedStorage {
    fn kind(&self) -> BackendKind {
        BackendKind::Decentralized
    }

    fn store(&self, data: &[u8]) -> Result<StoredRef, StorageError> {
        let set = self.seal_partitions(&partition(data, self.gamma)?);
        let locations = assign_and_upload(&set, &self.table, self.policy.as_ref(), &self.pool, self.max_attempts)?;
        let key = self.location_key.as_ref().map(EncryptionKey::Symmetric);
        let tx = record_locations(&self.ledger, self.provider.as_ref(), &self.owner, &locations, key)?;
        Ok(StoredRef::Decentralized { tx: tx.id })
    }

    fn load(&self, r: &StoredRef) -> Result<Vec<u8>, StorageError> {
        let StoredRef::Decentralized { tx } = r else {
            return Err(StorageError::WrongBackend { expected: BackendKind::Decentralized });
        };
        let tx = self.ledger.get(*tx).ok_or(StorageError::UnknownObject(tx.to_string()))?;
        let locations = parse_locations(&tx, self.location_key.as_ref().map(DecryptionKey::Symmetric))?;
        let sealed = fetch(&locations, &self.pool)?;
        assemble(&self.open_partitions(&sealed)?)
    }
}

/// A host-run key/value store: a data server in memory or a directory on disk.
#[derive(Debug)]
pub struct SelfHostedStore {
    name: String,
    up: RwLock<bool>,
    inner: HostInner,
}

#[derive(Debug)]
enum HostInner {
    Memory(Mutex<HashMap<String, Vec<u8>>>),
    Directory(PathBuf),
}

impl SelfHostedStore {
    pub fn in_memory(name: impl Into<String>) -> Self {
        SelfHostedStore { name: name.into(), up: RwLock::new(true), inner: HostInner::Memory(Mutex::default()) }
    }

    pub fn directory(name: impl Into<String>, dir: impl Into<PathBuf>) -> Result<Self, StorageError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| StorageError::Io(e.to_string()))?;
        Ok(SelfHostedStore { name: name.into(), up: RwLock::new(true), inner: HostInner::Directory(dir) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_up(&self, up: bool) {
        *self.up.write() = up;
    }

    pub fn is_up(&self) -> bool {
        *self.up.read()
    }

    pub fn put(&self, key: &str, bytes: &[u8]) -> Result<(), StorageError> {
        check_key(key)?;
        if !self.is_up() {
            return Err(StorageError::HostUnreachable(self.name.clone()));
        }
        match &self.inner {
            HostInner::Memory(m) => {
                m.lock().insert(key.to_string(), bytes.to_vec());
                Ok(())
            }
            HostInner::Directory(dir) => std::fs::write(dir.join(key), bytes).map_err(|e| StorageError::Io(e.to_string())),
        }
    }

    pub fn get(&self, key: &str) -> Result<Vec<u8>, StorageError> {
        check_key(key)?;
        if !self.is_up() {
            return Err(StorageError::HostUnreachable(self.name.clone()));
        }
        let found = match &self.inner {
            HostInner::Memory(m) => m.lock().get(key).cloned(),
            HostInner::Directory(dir) => std::fs::read(dir.join(key)).ok(),
        };
        found.ok_or_else(|| StorageError::UnknownObject(format!("{}/{key}", self.name)))
    }
}

fn check_key(key: &str) -> Result<(), StorageError> {
    let ok = !key.is_empty()
        && !key.starts_with('.')
        && key.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(StorageError::UnknownObject(format!("invalid object key `{key}`")))
    }
}

/// Self-hosted storage for one owner: data sealed under a fresh symmetric key,
/// the key wrapped with the owner's public key.
#[derive(Debug)]
pub struct SelfHostedStorage {
    pub host: Arc<SelfHostedStore>,
    pub provider: Arc<dyn CryptoProvider>,
    pub owner: AsymmetricKeyPair,
}

impl StorageBackend for SelfHostedStorage {
    fn kind(&self) -> BackendKind {
        BackendKind::SelfHosted
    }

    fn store(&self, data: &[u8]) -> Result<StoredRef, StorageError> {
        let (r, sealed, wrapped) = seal_for_host(self.provider.as_ref(), self.host.name(), &self.owner, data);
        if let StoredRef::SelfHosted { data: dk, key: kk, .. } = &r {
            self.host.put(dk, &sealed)?;
            self.host.put(kk, &wrapped)?;
        }
        Ok(r)
    }

    fn load(&self, r: &StoredRef) -> Result<Vec<u8>, StorageError> {
        let StoredRef::SelfHosted { data, key, .. } = r else {
            return Err(StorageError::WrongBackend { expected: BackendKind::SelfHosted });
        };
        open_from_host(&self.host.get(data)?, &self.host.get(key)?, &self.owner)
    }
}

/// Seals `data` for storage on `host`: returns the reference, `E_e(d, κ)` and
/// `E_e(κ, pk_owner)`.
pub fn seal_for_host(
    provider: &dyn CryptoProvider,
    host: &str,
    owner: &AsymmetricKeyPair,
    data: &[u8],
) -> (StoredRef, Vec<u8>, Vec<u8>) {
    let kappa = provider.gen_symmetric(None);
    let sealed = provider.encrypt(data, EncryptionKey::Symmetric(&kappa)).to_bytes();
    let wrapped = provider.encrypt(kappa.as_bytes(), EncryptionKey::Public(owner.public())).to_bytes();
    let name = hash(&sealed).to_hex();
    let r = StoredRef::SelfHosted { host: host.to_string(), data: format!("{name}.data"), key: format!("{name}.key") };
    (r, sealed, wrapped)
}

pub fn open_from_host(sealed: &[u8], wrapped: &[u8], owner: &AsymmetricKeyPair) -> Result<Vec<u8>, StorageError> {
    let kappa = crate::crypto::decrypt_bytes(wrapped, DecryptionKey::Secret(owner.secret()))
        .map_err(|_| StorageError::DecryptionFailure)?;
    let kappa = SymmetricKey::from_bytes(&kappa).map_err(|_| StorageError::DecryptionFailure)?;
    crate::crypto::decrypt_bytes(sealed, DecryptionKey::Symmetric(&kappa)).map_err(|_| StorageError::DecryptionFailure)
}

/// Address of a staged object: `sha256:<hex digest>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContentAddress(String);

impl ContentAddress {
    pub fn of(bytes: &[u8]) -> Self {
        ContentAddress(format!("sha256:{}", hash(bytes).to_hex()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContentAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Public content-addressed store where sources leave encrypted data for a
/// consumer.
#[derive(Debug)]
pub struct StagingSpace {
    name: String,
    up: RwLock<bool>,
    objects: Mutex<HashMap<ContentAddress, Vec<u8>>>,
}

impl StagingSpace {
    pub fn new(name: impl Into<String>) -> Self {
        StagingSpace { name: name.into(), up: RwLock::new(true), objects: Mutex::default() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_up(&self, up: bool) {
        *self.up.write() = up;
    }

    pub fn put(&self, bytes: &[u8]) -> Result<ContentAddress, StorageError> {
        if !*self.up.read() {
            return Err(StorageError::StagingUnreachable);
        }
        let addr = ContentAddress::of(bytes);
        self.objects.lock().insert(addr.clone(), bytes.to_vec());
        Ok(addr)
    }

    pub fn get(&self, addr: &ContentAddress) -> Result<Vec<u8>, StorageError> {
        if !*self.up.read() {
            return Err(StorageError::StagingUnreachable);
        }
        self.objects.lock().get(addr).cloned().ok_or_else(|| StorageError::UnknownObject(addr.to_string()))
    }

    pub fn len(&self) -> usize {
        self.objects.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `m`: where to fetch `E_e(d, κ)` and `E_e(κ, pk_c)` from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageInfo {
    pub backend: BackendKind,
    pub space: String,
    pub data: ContentAddress,
    pub key: ContentAddress,
}

impl StorageInfo {
    pub fn to_bytes(&self) -> Vec<u8> {
        canonical::to_bytes(self).expect("storage info always serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StorageError> {
        canonical::from_slice(bytes).map_err(|e| StorageError::MalformedEnvelope(e.to_string()))
    }
}
