//! Decentralized identifiers, the ledger-backed registry and verifiable
//! credentials.

mod credential;
mod registry;

pub use credential::{
    issue_vc, remove_property, verify_issuer_binding, verify_ownership, verify_proof, CredentialSubject,
    OwnershipCheck, OwnershipFailure, Proof, ReducedCredential, VerifiableCredential, VC_PROPERTIES,
};
pub use registry::{Registry, ResolutionOutcome};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crypto::{AsymmetricKeyPair, CryptoProvider, KeyId, PublicKey, WalletAddress};
use crate::ledger::{FinalizationResult, LedgerError};

pub const DID_METHOD: &str = "agg";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("malformed DID `{0}`")]
    MalformedDid(String),
    #[error("DID {0} is already propagated")]
    DuplicateDid(Did),
    #[error("DID {0} does not resolve")]
    UnknownDid(Did),
    #[error("issuer {0} does not resolve")]
    UnresolvableIssuer(Did),
    #[error("key {key} is not the current {role} key of {did}")]
    KeyMismatch { did: Did, role: &'static str, key: KeyId },
    #[error("invalid DID document: {0}")]
    InvalidDocument(String),
    #[error("unknown credential property `{0}`")]
    UnknownProperty(String),
    #[error("ledger did not finalize the transaction ({} nodes accepted)", .0.accepted_nodes)]
    LedgerRejection(FinalizationResult),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// `did:<method>:<unique-suffix>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Did(String);

impl Did {
    /// `did:agg:` followed by the wallet address of the authentication key.
    pub fn for_key(pk: &PublicKey) -> Did {
        Did(format!("did:{DID_METHOD}:{}", WalletAddress::of(pk)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn method(&self) -> &str {
        self.0.split(':').nth(1).unwrap_or_default()
    }
}

impl FromStr for Did {
    type Err = IdentityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, ':');
        let ok = parts.next() == Some("did")
            && parts.next().is_some_and(|m| !m.is_empty() && m.bytes().all(|b| b.is_ascii_alphanumeric()))
            && parts.next().is_some_and(|rest| !rest.is_empty() && !rest.contains(char::is_whitespace));
        if ok {
            Ok(Did(s.to_string()))
        } else {
            Err(IdentityError::MalformedDid(s.to_string()))
        }
    }
}

impl TryFrom<String> for Did {
    type Error = IdentityError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Did> for String {
    fn from(d: Did) -> String {
        d.0
    }
}

impl fmt::Display for Did {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The resolved record `{id, auth, assert}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DidDocument {
    pub id: Did,
    pub auth: KeyId,
    pub assert: KeyId,
}

impl DidDocument {
    pub fn new(id: Did, auth: KeyId, assert: KeyId) -> Result<Self, IdentityError> {
        if auth == assert {
            return Err(IdentityError::InvalidDocument("auth and assert keys must differ".into()));
        }
        Ok(DidDocument { id, auth, assert })
    }

    pub fn auth_key(&self) -> Option<PublicKey> {
        self.auth.resolve().ok()
    }

    pub fn assert_key(&self) -> Option<PublicKey> {
        self.assert.resolve().ok()
    }
}

/// The authentication and assertion keypairs of one entity.
#[derive(Debug, Clone)]
pub struct Keyring {
    pub auth: AsymmetricKeyPair,
    pub assert: AsymmetricKeyPair,
}

/// An entity's DID together with the secrets it controls.
#[derive(Debug, Clone)]
pub struct Identity {
    pub did: Did,
    pub keyring: Keyring,
}

impl Identity {
    /// Seeded identities are reproducible; the two keypairs use derived seeds.
    pub fn generate(provider: &dyn CryptoProvider, seed: Option<u64>) -> Self {
        let auth = provider.gen_keypair(seed.map(|s| s.wrapping_mul(2)));
        let assert = provider.gen_keypair(seed.map(|s| s.wrapping_mul(2).wrapping_add(1)));
        Identity { did: Did::for_key(auth.public()), keyring: Keyring { auth, assert } }
    }

    pub fn document(&self) -> DidDocument {
        DidDocument {
            id: self.did.clone(),
            auth: self.keyring.auth.id().clone(),
            assert: self.keyring.assert.id().clone(),
        }
    }

    pub fn wallet(&self) -> WalletAddress {
        WalletAddress::of(self.keyring.auth.public())
    }
}
