use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{Did, Identity, IdentityError, Registry};
use crate::canonical;
use crate::crypto::{hash, sign_recover, verify_recover_bytes, KeyId};

/// `α_vc`.
pub const VC_PROPERTIES: [&str; 4] = ["id", "issuer", "credentialSubject", "proof"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CredentialSubject {
    pub id: Did,
    /// Opaque statement; for ownership credentials, the digest of the data.
    #[serde(with = "canonical::hex_bytes")]
    pub claim: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Proof {
    pub key: KeyId,
    /// Serialized private-key transform over `V ⊖ proof`.
    #[serde(with = "canonical::hex_bytes")]
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifiableCredential {
    pub id: String,
    pub issuer: Did,
    #[serde(rename = "credentialSubject")]
    pub credential_subject: CredentialSubject,
    pub proof: Proof,
}

impl VerifiableCredential {
    pub fn to_canonical(&self) -> String {
        canonical::to_string(self).expect("credentials always serialize")
    }

    pub fn from_canonical(text: &str) -> Result<Self, canonical::CanonicalError> {
        canonical::from_str(text)
    }

    /// Canonical bytes of `V ⊖ proof`, the signed payload.
    pub fn signing_payload(&self) -> Vec<u8> {
        remove_property(self, "proof").expect("proof is in α_vc").canonical_bytes()
    }
}

/// A credential with one property removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedCredential {
    fields: Map<String, Value>,
}

impl ReducedCredential {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical::value_to_string(&Value::Object(self.fields.clone())).into_bytes()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.fields.contains_key(name)
    }

    /// Puts a property back; the inverse of [`remove_property`].
    pub fn with_property(mut self, name: &str, value: Value) -> Self {
        self.fields.insert(name.to_string(), value);
        self
    }
}

/// `V ⊖ name`.
pub fn remove_property(vc: &VerifiableCredential, name: &str) -> Result<ReducedCredential, IdentityError> {
    if !VC_PROPERTIES.contains(&name) {
        return Err(IdentityError::UnknownProperty(name.to_string()));
    }
    let Value::Object(mut fields) = serde_json::to_value(vc).expect("credentials always serialize") else {
        unreachable!("a struct serializes to an object")
    };
    fields.remove(name);
    Ok(ReducedCredential { fields })
}

/// Issues a credential with `proof.key = issuer.assert` and
/// `proof.value = S_s(V ⊖ proof, sk_assert)`.
///
/// The issuer's DID must resolve and its document must name the assertion key
/// the issuer signs with.
pub fn issue_vc(
    registry: &Registry,
    issuer: &Identity,
    subject: &Did,
    claim: Vec<u8>,
) -> Result<VerifiableCredential, IdentityError> {
    let doc = registry
        .resolve(&issuer.did)
        .document()
        .ok_or_else(|| IdentityError::UnresolvableIssuer(issuer.did.clone()))?;
    let assert = &issuer.keyring.assert;
    if &doc.assert != assert.id() {
        return Err(IdentityError::KeyMismatch {
            did: issuer.did.clone(),
            role: "assert",
            key: assert.id().clone(),
        });
    }
    let mut id_input = Vec::new();
    id_input.extend_from_slice(issuer.did.as_str().as_bytes());
    id_input.push(0);
    id_input.extend_from_slice(subject.as_str().as_bytes());
    id_input.push(0);
    id_input.extend_from_slice(&claim);
    let id = format!("urn:vc:{}", &hash(&id_input).to_hex()[..32]);

    let mut vc = VerifiableCredential {
        id,
        issuer: issuer.did.clone(),
        credential_subject: CredentialSubject { id: subject.clone(), claim },
        proof: Proof { key: doc.assert, value: Vec::new() },
    };
    vc.proof.value = sign_recover(&vc.signing_payload(), assert.secret()).to_bytes();
    Ok(vc)
}

/// The ownership clause that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OwnershipFailure {
    /// `credentialSubject.id ≠ s.id`
    #[serde(rename = "OWN_SUBJECT_MISMATCH")]
    SubjectMismatch,
    /// `credentialSubject.claim ≠ H(d)`
    #[serde(rename = "OWN_CLAIM_MISMATCH")]
    ClaimMismatch,
    /// `S_v(proof.value, proof.key) ≠ V ⊖ proof`
    #[serde(rename = "OWN_PROOF_INVALID")]
    ProofInvalid,
}

impl OwnershipFailure {
    pub fn code(self) -> &'static str {
        match self {
            OwnershipFailure::SubjectMismatch => "OWN_SUBJECT_MISMATCH",
            OwnershipFailure::ClaimMismatch => "OWN_CLAIM_MISMATCH",
            OwnershipFailure::ProofInvalid => "OWN_PROOF_INVALID",
        }
    }
}

/// Result of checking the three ownership clauses. Every failing clause is
/// listed, in clause order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OwnershipCheck {
    pub failures: Vec<OwnershipFailure>,
}

impl OwnershipCheck {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn first_failure(&self) -> Option<OwnershipFailure> {
        self.failures.first().copied()
    }
}

fn subject_matches(vc: &VerifiableCredential, source: &Did) -> bool {
    &vc.credential_subject.id == source
}

fn claim_matches(vc: &VerifiableCredential, data: &[u8]) -> bool {
    vc.credential_subject.claim == hash(data).as_bytes()
}

/// Clause 3 alone: `proof.value` recovers `vc ⊖ proof` under `proof.key`.
pub fn verify_proof(vc: &VerifiableCredential) -> bool {
    let Ok(pk) = vc.proof.key.resolve() else {
        return false;
    };
    verify_recover_bytes(&vc.proof.value, &pk).is_ok_and(|obj| obj == vc.signing_payload())
}

/// Does `vc` prove that `source` owns `data`?
///
/// True iff the subject is `source`, the claim is `H(data)`, and the proof
/// recovers `vc ⊖ proof` under `proof.key`. Self-issued credentials pass;
/// binding the proof key to a particular issuer is [`verify_issuer_binding`]'s job.
pub fn verify_ownership(vc: &VerifiableCredential, source: &Did, data: &[u8]) -> OwnershipCheck {
    let mut failures = Vec::new();
    if !subject_matches(vc, source) {
        failures.push(OwnershipFailure::SubjectMismatch);
    }
    if !claim_matches(vc, data) {
        failures.push(OwnershipFailure::ClaimMismatch);
    }
    if !verify_proof(vc) {
        failures.push(OwnershipFailure::ProofInvalid);
    }
    OwnershipCheck { failures }
}

/// `proof.key` must be the assertion key currently published by `vc.issuer`.
pub fn verify_issuer_binding(vc: &VerifiableCredential, registry: &Registry) -> bool {
    registry.resolve(&vc.issuer).document().is_some_and(|doc| doc.assert == vc.proof.key)
}
