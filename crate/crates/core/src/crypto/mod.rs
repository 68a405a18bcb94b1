//! Keys, signatures with message recovery, authenticated encryption, hashing
//! and wallet addresses.
//!
//! The algorithm suite is fixed: Ed25519 for signing, X25519 + ChaCha20-Poly1305
//! for hybrid public-key encryption, ChaCha20-Poly1305 for symmetric encryption
//! and SHA-256 for digests. What varies between providers is where randomness
//! comes from; see [`CryptoProvider`].
//!
//! "Encrypting with a private key" is modelled as a signature with message
//! recovery: the ciphertext carries the object next to its signature and
//! "decrypting with the public key" verifies and returns the object.

mod provider;

pub use provider::{CryptoProvider, DeterministicProvider, ProviderKind, SystemProvider};

use std::fmt;
use std::str::FromStr;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

/// Length `l` of every digest.
pub const DIGEST_LEN: usize = 32;
pub const SYMMETRIC_KEY_LEN: usize = 32;
pub const PUBLIC_KEY_LEN: usize = 64;
/// `0x` followed by 40 hex characters.
pub const WALLET_ADDRESS_LEN: usize = 42;

const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;
const SIGNATURE_LEN: usize = 64;

const SIGN_DOMAIN: &[u8] = b"ssagg/recover/v1";
const SYM_AAD: &[u8] = b"ssagg/sym/v1";
const WRAP_AAD: &[u8] = b"ssagg/wrap/v1";
const BODY_AAD: &[u8] = b"ssagg/body/v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("signature recovery failed")]
    RecoveryFailure,
    #[error("decryption failed")]
    DecryptionFailure,
    #[error("invalid key identifier `{0}`")]
    InvalidKeyId(String),
    #[error("invalid key material")]
    InvalidKey,
}

/// Fixed-length SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl Digest {
    pub fn of(bytes: &[u8]) -> Self {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Symmetric data key `κ`.
#[derive(Clone, PartialEq, Eq)]
pub struct SymmetricKey {
    bytes: [u8; SYMMETRIC_KEY_LEN],
    id: String,
}

impl SymmetricKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let bytes: [u8; SYMMETRIC_KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidKey)?;
        let mut h = Sha256::new();
        h.update(b"ssagg/kid/v1");
        h.update(bytes);
        let id = format!("sym:{}", hex::encode(&h.finalize()[..8]));
        Ok(SymmetricKey { bytes, id })
    }

    pub fn key_id(&self) -> &str {
        &self.id
    }

    pub fn as_bytes(&self) -> &[u8; SYMMETRIC_KEY_LEN] {
        &self.bytes
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricKey").field("id", &self.id).finish_non_exhaustive()
    }
}

/// Public half of an entity keypair: an Ed25519 verifying key and an X25519
/// key-agreement key, both derived from one secret seed.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey {
    verify: [u8; 32],
    exchange: [u8; 32],
}

impl PublicKey {
    pub fn to_bytes(&self) -> [u8; PUBLIC_KEY_LEN] {
        let mut out = [0u8; PUBLIC_KEY_LEN];
        out[..32].copy_from_slice(&self.verify);
        out[32..].copy_from_slice(&self.exchange);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != PUBLIC_KEY_LEN {
            return Err(CryptoError::InvalidKey);
        }
        let mut verify = [0u8; 32];
        let mut exchange = [0u8; 32];
        verify.copy_from_slice(&bytes[..32]);
        exchange.copy_from_slice(&bytes[32..]);
        VerifyingKey::from_bytes(&verify).map_err(|_| CryptoError::InvalidKey)?;
        Ok(PublicKey { verify, exchange })
    }

    /// The key identifier `ι` naming this key.
    pub fn key_id(&self) -> KeyId {
        KeyId(format!("key:{}", hex::encode(self.to_bytes())))
    }

    fn verifying_key(&self) -> Result<VerifyingKey, CryptoError> {
        VerifyingKey::from_bytes(&self.verify).map_err(|_| CryptoError::InvalidKey)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({}..)", &hex::encode(self.verify)[..12])
    }
}

pub struct SecretKey {
    seed: [u8; 32],
}

impl SecretKey {
    fn from_seed(seed: [u8; 32]) -> Self {
        SecretKey { seed }
    }

    fn signing_key(&self) -> SigningKey {
        SigningKey::from_bytes(&self.seed)
    }

    fn exchange_secret(&self) -> x25519_dalek::StaticSecret {
        let mut h = Sha256::new();
        h.update(b"ssagg/x25519/v1");
        h.update(self.seed);
        let bytes: [u8; 32] = h.finalize().into();
        x25519_dalek::StaticSecret::from(bytes)
    }

    pub fn public_key(&self) -> PublicKey {
        let verify = self.signing_key().verifying_key().to_bytes();
        let exchange = x25519_dalek::PublicKey::from(&self.exchange_secret()).to_bytes();
        PublicKey { verify, exchange }
    }

    /// Every byte string that must never leave its owner: the seed and the
    /// derived key-agreement scalar. Used by trace hygiene checks.
    pub fn secret_material(&self) -> Vec<Vec<u8>> {
        vec![self.seed.to_vec(), self.exchange_secret().to_bytes().to_vec()]
    }
}

impl Clone for SecretKey {
    fn clone(&self) -> Self {
        SecretKey { seed: self.seed }
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// Key identifier `ι`.
///
/// The identifier embeds the public key it names (`key:<hex pk>`), so
/// resolving `ι` to `pk` needs no directory.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyId(String);

impl KeyId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn resolve(&self) -> Result<PublicKey, CryptoError> {
        let invalid = || CryptoError::InvalidKeyId(self.0.clone());
        let hex_part = self.0.strip_prefix("key:").ok_or_else(invalid)?;
        let bytes = hex::decode(hex_part).map_err(|_| invalid())?;
        let pk = PublicKey::from_bytes(&bytes).map_err(|_| invalid())?;
        // one key, one spelling: reject e.g. upper-case hex
        if pk.key_id() != *self {
            return Err(invalid());
        }
        Ok(pk)
    }
}

impl FromStr for KeyId {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = KeyId(s.to_string());
        id.resolve()?;
        Ok(id)
    }
}

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone)]
pub struct AsymmetricKeyPair {
    id: KeyId,
    public: PublicKey,
    secret: SecretKey,
}

impl AsymmetricKeyPair {
    pub(crate) fn from_seed(seed: [u8; 32]) -> Self {
        let secret = SecretKey::from_seed(seed);
        let public = secret.public_key();
        AsymmetricKeyPair { id: public.key_id(), public, secret }
    }

    pub fn id(&self) -> &KeyId {
        &self.id
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn secret(&self) -> &SecretKey {
        &self.secret
    }
}

/// `W(pk)`: `0x` + the first 20 bytes of SHA-256 over the public key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WalletAddress(String);

impl WalletAddress {
    pub fn of(pk: &PublicKey) -> Self {
        let mut h = Sha256::new();
        h.update(b"ssagg/wallet/v1");
        h.update(pk.to_bytes());
        WalletAddress(format!("0x{}", hex::encode(&h.finalize()[..20])))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for WalletAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Symmetric,
    PublicKey,
    PrivateKeyTransform,
}

impl Scheme {
    fn tag(self) -> u8 {
        match self {
            Scheme::Symmetric => 1,
            Scheme::PublicKey => 2,
            Scheme::PrivateKeyTransform => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Scheme::Symmetric),
            2 => Some(Scheme::PublicKey),
            3 => Some(Scheme::PrivateKeyTransform),
            _ => None,
        }
    }
}

/// Output of every encryption and signing operation.
///
/// Serialized as one scheme-tag byte followed by the payload, so ciphertexts
/// nest: `E_e(E_e(V, sk_s), pk_c)` is `encrypt(sign_recover(V, sk_s).to_bytes(), pk_c)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext {
    scheme: Scheme,
    payload: Vec<u8>,
}

impl Ciphertext {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload.len() + 1);
        out.push(self.scheme.tag());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses a serialized ciphertext. Only the tag is checked here;
    /// integrity is checked by the operation that consumes it.
    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let (&tag, payload) = bytes.split_first()?;
        Some(Ciphertext { scheme: Scheme::from_tag(tag)?, payload: payload.to_vec() })
    }

    /// Raw constructor, mostly for fault-injection tests.
    pub fn from_parts(scheme: Scheme, payload: Vec<u8>) -> Self {
        Ciphertext { scheme, payload }
    }
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ciphertext({:?}, {} bytes)", self.scheme, self.payload.len())
    }
}

impl Serialize for Ciphertext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            s.serialize_str(&hex::encode(self.to_bytes()))
        } else {
            s.serialize_bytes(&self.to_bytes())
        }
    }
}

impl<'de> Deserialize<'de> for Ciphertext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let bytes = if d.is_human_readable() {
            let s = String::deserialize(d)?;
            hex::decode(s).map_err(serde::de::Error::custom)?
        } else {
            serde_bytes_vec(d)?
        };
        Ciphertext::from_bytes(&bytes).ok_or_else(|| serde::de::Error::custom("bad ciphertext tag"))
    }
}

fn serde_bytes_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
    struct V;
    impl<'de> serde::de::Visitor<'de> for V {
        type Value = Vec<u8>;
        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("bytes")
        }
        fn visit_bytes<E: serde::de::Error>(self, v: &[u8]) -> Result<Vec<u8>, E> {
            Ok(v.to_vec())
        }
        fn visit_byte_buf<E: serde::de::Error>(self, v: Vec<u8>) -> Result<Vec<u8>, E> {
            Ok(v)
        }
        fn visit_seq<A: serde::de::SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<u8>, A::Error> {
            let mut out = Vec::new();
            while let Some(b) = seq.next_element()? {
                out.push(b);
            }
            Ok(out)
        }
    }
    d.deserialize_byte_buf(V)
}

pub enum EncryptionKey<'a> {
    Symmetric(&'a SymmetricKey),
    Public(&'a PublicKey),
}

pub enum DecryptionKey<'a> {
    Symmetric(&'a SymmetricKey),
    Secret(&'a SecretKey),
    /// Opens a private-key transform, i.e. verifies and recovers a signature.
    Public(&'a PublicKey),
}

/// `H`.
pub fn hash(obj: &[u8]) -> Digest {
    Digest::of(obj)
}

/// `S_s`.
pub fn sign_recover(obj: &[u8], sk: &SecretKey) -> Ciphertext {
    let sig: Signature = sk.signing_key().sign(&signing_input(&sk.public_key(), obj));
    let mut payload = Vec::with_capacity(SIGNATURE_LEN + obj.len());
    payload.extend_from_slice(&sig.to_bytes());
    payload.extend_from_slice(obj);
    Ciphertext { scheme: Scheme::PrivateKeyTransform, payload }
}

/// `S_v`: returns the signed object iff `sig` was produced by the secret
/// matching `pk`.
pub fn verify_recover(sig: &Ciphertext, pk: &PublicKey) -> Result<Vec<u8>, CryptoError> {
    if sig.scheme != Scheme::PrivateKeyTransform || sig.payload.len() < SIGNATURE_LEN {
        return Err(CryptoError::RecoveryFailure);
    }
    let (sig_bytes, obj) = sig.payload.split_at(SIGNATURE_LEN);
    let signature = Signature::from_slice(sig_bytes).map_err(|_| CryptoError::RecoveryFailure)?;
    let vk = pk.verifying_key().map_err(|_| CryptoError::RecoveryFailure)?;
    vk.verify_strict(&signing_input(pk, obj), &signature)
        .map_err(|_| CryptoError::RecoveryFailure)?;
    Ok(obj.to_vec())
}

/// `S_v` with a key identifier in place of the key.
pub fn verify_recover_with_id(sig: &Ciphertext, id: &KeyId) -> Result<Vec<u8>, CryptoError> {
    let pk = id.resolve().map_err(|_| CryptoError::RecoveryFailure)?;
    verify_recover(sig, &pk)
}

/// Same as [`verify_recover`] over a serialized ciphertext.
pub fn verify_recover_bytes(sig: &[u8], pk: &PublicKey) -> Result<Vec<u8>, CryptoError> {
    let ct = Ciphertext::from_bytes(sig).ok_or(CryptoError::RecoveryFailure)?;
    verify_recover(&ct, pk)
}

// The full public key is part of the signed message, so a signature only
// verifies under the exact 64-byte key it was made for.
fn signing_input(signer: &PublicKey, obj: &[u8]) -> Vec<u8> {
    let mut m = Vec::with_capacity(SIGN_DOMAIN.len() + PUBLIC_KEY_LEN + obj.len());
    m.extend_from_slice(SIGN_DOMAIN);
    m.extend_from_slice(&signer.to_bytes());
    m.extend_from_slice(obj);
    m
}

/// `E_d`.
pub fn decrypt(ct: &Ciphertext, key: DecryptionKey<'_>) -> Result<Vec<u8>, CryptoError> {
    match (ct.scheme, key) {
        (Scheme::Symmetric, DecryptionKey::Symmetric(k)) => open_symmetric(&ct.payload, k),
        (Scheme::PublicKey, DecryptionKey::Secret(sk)) => open_public(&ct.payload, sk),
        (Scheme::PrivateKeyTransform, DecryptionKey::Public(pk)) => {
            verify_recover(ct, pk).map_err(|_| CryptoError::DecryptionFailure)
        }
        _ => Err(CryptoError::DecryptionFailure),
    }
}

/// Same as [`decrypt`] over a serialized ciphertext.
pub fn decrypt_bytes(ct: &[u8], key: DecryptionKey<'_>) -> Result<Vec<u8>, CryptoError> {
    let ct = Ciphertext::from_bytes(ct).ok_or(CryptoError::DecryptionFailure)?;
    decrypt(&ct, key)
}

fn aead_seal(key: &[u8; 32], nonce: &[u8; NONCE_LEN], msg: &[u8], aad: &[u8]) -> Vec<u8> {
    ChaCha20Poly1305::new(key.into())
        .encrypt(Nonce::from_slice(nonce), Payload { msg, aad })
        .expect("ChaCha20-Poly1305 encryption cannot fail for in-memory buffers")
}

fn aead_open(key: &[u8; 32], nonce: &[u8], ct: &[u8], aad: &[u8]) -> Result<Vec<u8>, CryptoError> {
    ChaCha20Poly1305::new(key.into())
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad })
        .map_err(|_| CryptoError::DecryptionFailure)
}

fn seal_symmetric(obj: &[u8], key: &SymmetricKey, nonce: [u8; NONCE_LEN]) -> Ciphertext {
    let mut payload = nonce.to_vec();
    payload.extend(aead_seal(&key.bytes, &nonce, obj, SYM_AAD));
    Ciphertext { scheme: Scheme::Symmetric, payload }
}

fn open_symmetric(payload: &[u8], key: &SymmetricKey) -> Result<Vec<u8>, CryptoError> {
    if payload.len() < NONCE_LEN + TAG_LEN {
        return Err(CryptoError::DecryptionFailure);
    }
    let (nonce, body) = payload.split_at(NONCE_LEN);
    aead_open(&key.bytes, nonce, body, SYM_AAD)
}

/// Randomness consumed by one public-key encryption.
struct HybridRandomness {
    ephemeral: [u8; 32],
    data_key: [u8; 32],
    wrap_nonce: [u8; NONCE_LEN],
    body_nonce: [u8; NONCE_LEN],
}

fn key_encryption_key(shared: &[u8; 32], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"ssagg/kek/v1");
    h.update(shared);
    h.update(ephemeral);
    h.update(recipient);
    h.finalize().into()
}

// Layout: ephemeral pk (32) | wrap nonce (12) | wrapped data key (48) | body nonce (12) | body
const WRAPPED_KEY_LEN: usize = SYMMETRIC_KEY_LEN + TAG_LEN;
const HYBRID_HEADER_LEN: usize = 32 + NONCE_LEN + WRAPPED_KEY_LEN + NONCE_LEN;

fn seal_public(obj: &[u8], pk: &PublicKey, rnd: HybridRandomness) -> Ciphertext {
    let eph_secret = x25519_dalek::StaticSecret::from(rnd.ephemeral);
    let eph_public = x25519_dalek::PublicKey::from(&eph_secret).to_bytes();
    let shared = eph_secret.diffie_hellman(&x25519_dalek::PublicKey::from(pk.exchange));
    let kek = key_encryption_key(shared.as_bytes(), &eph_public, &pk.exchange);

    let mut payload = Vec::with_capacity(HYBRID_HEADER_LEN + obj.len() + TAG_LEN);
    payload.extend_from_slice(&eph_public);
    payload.extend_from_slice(&rnd.wrap_nonce);
    payload.extend(aead_seal(&kek, &rnd.wrap_nonce, &rnd.data_key, WRAP_AAD));
    payload.extend_from_slice(&rnd.body_nonce);
    payload.extend(aead_seal(&rnd.data_key, &rnd.body_nonce, obj, BODY_AAD));
    Ciphertext { scheme: Scheme::PublicKey, payload }
}

fn open_public(payload: &[u8], sk: &SecretKey) -> Result<Vec<u8>, CryptoError> {
    if payload.len() < HYBRID_HEADER_LEN + TAG_LEN {
        return Err(CryptoError::DecryptionFailure);
    }
    let eph_public: [u8; 32] = payload[..32].try_into().unwrap();
    let wrap_nonce = &payload[32..32 + NONCE_LEN];
    let wrapped = &payload[32 + NONCE_LEN..32 + NONCE_LEN + WRAPPED_KEY_LEN];
    let body_nonce = &payload[HYBRID_HEADER_LEN - NONCE_LEN..HYBRID_HEADER_LEN];
    let body = &payload[HYBRID_HEADER_LEN..];

    let secret = sk.exchange_secret();
    let own_public = x25519_dalek::PublicKey::from(&secret).to_bytes();
    let shared = secret.diffie_hellman(&x25519_dalek::PublicKey::from(eph_public));
    if !shared.was_contributory() {
        return Err(CryptoError::DecryptionFailure);
    }
    let kek = key_encryption_key(shared.as_bytes(), &eph_public, &own_public);
    let data_key: [u8; 32] = aead_open(&kek, wrap_nonce, wrapped, WRAP_AAD)?
        .try_into()
        .map_err(|_| CryptoError::DecryptionFailure)?;
    aead_open(&data_key, body_nonce, body, BODY_AAD)
}
