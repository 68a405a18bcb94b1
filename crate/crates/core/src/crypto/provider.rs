use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest as _, Sha256};

use super::{
    decrypt, hash, seal_public, seal_symmetric, sign_recover, verify_recover, AsymmetricKeyPair,
    Ciphertext, CryptoError, DecryptionKey, Digest, EncryptionKey, HybridRandomness, PublicKey,
    SecretKey, SymmetricKey, WalletAddress, NONCE_LEN, SYMMETRIC_KEY_LEN,
};

/// Source of randomness for key generation and encryption.
///
/// The cryptographic operations themselves are shared; providers only decide
/// where fresh bytes come from. Implementations must be safe to share across
/// threads.
pub trait CryptoProvider: Send + Sync + fmt::Debug {
    fn kind(&self) -> ProviderKind;

    /// Fills `out` with fresh bytes for the operation named by `label`.
    /// `binding` lists the operation's inputs; a deterministic provider derives
    /// the output from them, a system provider ignores them.
    fn fill_random(&self, label: &str, binding: &[&[u8]], out: &mut [u8]);

    /// Seeded generation is reproducible under every provider.
    fn gen_symmetric(&self, seed: Option<u64>) -> SymmetricKey {
        let mut bytes = [0u8; SYMMETRIC_KEY_LEN];
        match seed {
            Some(seed) => seeded_rng("symmetric", seed).fill_bytes(&mut bytes),
            None => self.fill_random("gen-symmetric", &[], &mut bytes),
        }
        SymmetricKey::from_bytes(&bytes).expect("length is fixed")
    }

    fn gen_keypair(&self, seed: Option<u64>) -> AsymmetricKeyPair {
        let mut bytes = [0u8; 32];
        match seed {
            Some(seed) => seeded_rng("keypair", seed).fill_bytes(&mut bytes),
            None => self.fill_random("gen-keypair", &[], &mut bytes),
        }
        AsymmetricKeyPair::from_seed(bytes)
    }

    /// `E_e`. Public-key mode wraps a fresh data key, so any length works.
    fn encrypt(&self, obj: &[u8], key: EncryptionKey<'_>) -> Ciphertext {
        match key {
            EncryptionKey::Symmetric(k) => {
                let mut nonce = [0u8; NONCE_LEN];
                self.fill_random("sym-nonce", &[k.as_bytes(), obj], &mut nonce);
                seal_symmetric(obj, k, nonce)
            }
            EncryptionKey::Public(pk) => {
                let pk_bytes = pk.to_bytes();
                let mut buf = [0u8; 32 + 32 + NONCE_LEN + NONCE_LEN];
                self.fill_random("hybrid", &[&pk_bytes, obj], &mut buf);
                let (ephemeral, rest) = buf.split_at(32);
                let (data_key, rest) = rest.split_at(32);
                let (wrap_nonce, body_nonce) = rest.split_at(NONCE_LEN);
                let rnd = HybridRandomness {
                    ephemeral: ephemeral.try_into().unwrap(),
                    data_key: data_key.try_into().unwrap(),
                    wrap_nonce: wrap_nonce.try_into().unwrap(),
                    body_nonce: body_nonce.try_into().unwrap(),
                };
                seal_public(obj, pk, rnd)
            }
        }
    }

    fn decrypt(&self, ct: &Ciphertext, key: DecryptionKey<'_>) -> Result<Vec<u8>, CryptoError> {
        decrypt(ct, key)
    }

    fn sign_recover(&self, obj: &[u8], sk: &SecretKey) -> Ciphertext {
        sign_recover(obj, sk)
    }

    fn verify_recover(&self, sig: &Ciphertext, pk: &PublicKey) -> Result<Vec<u8>, CryptoError> {
        verify_recover(sig, pk)
    }

    fn hash(&self, obj: &[u8]) -> Digest {
        hash(obj)
    }

    fn wallet_address(&self, pk: &PublicKey) -> WalletAddress {
        WalletAddress::of(pk)
    }
}

fn seeded_rng(label: &str, seed: u64) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"ssagg/gen/");
    h.update(label.as_bytes());
    h.update(seed.to_le_bytes());
    ChaCha20Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    System,
    Deterministic,
}

impl ProviderKind {
    /// Name of the environment variable the CLI reads for its default provider.
    pub const ENV_VAR: &'static str = "SSAGG_CRYPTO";

    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::System => "system",
            ProviderKind::Deterministic => "deterministic",
        }
    }

    pub fn build(self, seed: u64) -> Box<dyn CryptoProvider> {
        match self {
            ProviderKind::System => Box::new(SystemProvider),
            ProviderKind::Deterministic => Box::new(DeterministicProvider::new(seed)),
        }
    }
}

impl FromStr for ProviderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" | "real" => Ok(ProviderKind::System),
            "deterministic" | "test" => Ok(ProviderKind::Deterministic),
            other => Err(format!("unknown crypto provider `{other}`")),
        }
    }
}

/// Draws from the operating system's entropy source.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemProvider;

impl CryptoProvider for SystemProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::System
    }

    fn fill_random(&self, _label: &str, _binding: &[&[u8]], out: &mut [u8]) {
        rand::rngs::OsRng.fill_bytes(out);
    }
}

/// Derives every random byte from a seed and the operation's inputs, so a
/// whole simulation run is reproducible byte for byte.
///
/// Encryption under this provider is deterministic: equal plaintexts under the
/// same key give equal ciphertexts. That is acceptable for simulation traces
/// and nothing else.
#[derive(Debug)]
pub struct DeterministicProvider {
    seed: u64,
    counter: AtomicU64,
}

impl DeterministicProvider {
    pub fn new(seed: u64) -> Self {
        DeterministicProvider { seed, counter: AtomicU64::new(0) }
    }
}

impl CryptoProvider for DeterministicProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Deterministic
    }

    fn fill_random(&self, label: &str, binding: &[&[u8]], out: &mut [u8]) {
        let mut h = Sha256::new();
        h.update(b"ssagg/det/");
        h.update(self.seed.to_le_bytes());
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        if binding.is_empty() {
            // unbound draws (key generation) must still differ call to call
            h.update(self.counter.fetch_add(1, Ordering::Relaxed).to_le_bytes());
        }
        for part in binding {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        ChaCha20Rng::from_seed(h.finalize().into()).fill_bytes(out);
    }
}
