use std::sync::Arc;

use super::{Did, DidDocument, IdentityError};
use crate::crypto::{AsymmetricKeyPair, KeyId, WalletAddress};
use crate::ledger::{FinalizationResult, Ledger, PropValue, Query, Transaction, TxDraft, TxKind};

const REGISTRY_KINDS: [TxKind; 3] = [TxKind::Propagation, TxKind::Update, TxKind::Deletion];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolutionOutcome {
    Document(DidDocument),
    /// `∅`: never propagated, or deleted by the latest transaction.
    Empty,
}

impl ResolutionOutcome {
    pub fn document(self) -> Option<DidDocument> {
        match self {
            ResolutionOutcome::Document(d) => Some(d),
            ResolutionOutcome::Empty => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ResolutionOutcome::Empty)
    }
}

/// Registry contract semantics over the ledger.
///
/// Holds no state of its own: every resolution is a fold over finalized
/// transactions, so all copies of the registry agree.
#[derive(Debug, Clone)]
pub struct Registry {
    ledger: Arc<Ledger>,
}

impl Registry {
    pub fn new(ledger: Arc<Ledger>) -> Self {
        Registry { ledger }
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.ledger
    }

    /// Appends a `τ_p` carrying `{did, auth, assert}`. The submitter must hold
    /// the document's authentication key. A deleted DID may be propagated again.
    pub fn propagate(
        &self,
        doc: &DidDocument,
        submitter: &AsymmetricKeyPair,
    ) -> Result<FinalizationResult, IdentityError> {
        if doc.auth == doc.assert {
            return Err(IdentityError::InvalidDocument("auth and assert keys must differ".into()));
        }
        if submitter.id() != &doc.auth {
            return Err(IdentityError::KeyMismatch {
                did: doc.id.clone(),
                role: "auth",
                key: submitter.id().clone(),
            });
        }
        if !self.resolve(&doc.id).is_empty() {
            return Err(IdentityError::DuplicateDid(doc.id.clone()));
        }
        let draft = TxDraft::new(TxKind::Propagation, WalletAddress::of(submitter.public()))
            .with("did", PropValue::text(doc.id.as_str()))
            .with("auth", PropValue::text(doc.auth.as_str()))
            .with("assert", PropValue::text(doc.assert.as_str()));
        self.finalize(draft)
    }

    /// Appends a `τ_u`. `None` leaves a key as it is; the transaction always
    /// carries the full new evaluation so the latest transaction alone
    /// determines the document.
    pub fn update(
        &self,
        did: &Did,
        new_auth: Option<KeyId>,
        new_assert: Option<KeyId>,
        controller: &AsymmetricKeyPair,
    ) -> Result<FinalizationResult, IdentityError> {
        let current = self.controlled(did, controller)?;
        let auth = new_auth.unwrap_or_else(|| current.auth.clone());
        let assert = new_assert.unwrap_or_else(|| current.assert.clone());
        if auth == assert {
            return Err(IdentityError::InvalidDocument("auth and assert keys must differ".into()));
        }
        let draft = TxDraft::new(TxKind::Update, WalletAddress::of(controller.public()))
            .with("did", PropValue::text(did.as_str()))
            .with("auth", PropValue::text(auth.as_str()))
            .with("assert", PropValue::text(assert.as_str()));
        self.finalize(draft)
    }

    /// Appends a `τ_d` with `deleted = ⊤`.
    pub fn delete(&self, did: &Did, controller: &AsymmetricKeyPair) -> Result<FinalizationResult, IdentityError> {
        self.controlled(did, controller)?;
        let draft = TxDraft::new(TxKind::Deletion, WalletAddress::of(controller.public()))
            .with("did", PropValue::text(did.as_str()))
            .with("deleted", PropValue::Bool(true));
        self.finalize(draft)
    }

    /// `R`: parses the finalized registry transaction with the greatest
    /// timestamp for `did`.
    pub fn resolve(&self, did: &Did) -> ResolutionOutcome {
        let q = Query::kinds(&REGISTRY_KINDS).text_eq("did", did.as_str());
        match self.ledger.latest(&q) {
            Some(tx) => parse_registry_tx(did, &tx),
            None => ResolutionOutcome::Empty,
        }
    }

    /// Every registry transaction for `did`, oldest first.
    pub fn history(&self, did: &Did) -> Vec<Transaction> {
        self.ledger.query(&Query::kinds(&REGISTRY_KINDS).text_eq("did", did.as_str()))
    }

    fn controlled(&self, did: &Did, controller: &AsymmetricKeyPair) -> Result<DidDocument, IdentityError> {
        let current = self.resolve(did).document().ok_or_else(|| IdentityError::UnknownDid(did.clone()))?;
        if controller.id() != &current.auth {
            return Err(IdentityError::KeyMismatch {
                did: did.clone(),
                role: "auth",
                key: controller.id().clone(),
            });
        }
        Ok(current)
    }

    fn finalize(&self, draft: TxDraft) -> Result<FinalizationResult, IdentityError> {
        let result = self.ledger.submit(draft)?;
        if result.finalized {
            Ok(result)
        } else {
            Err(IdentityError::LedgerRejection(result))
        }
    }
}

fn parse_registry_tx(did: &Did, tx: &Transaction) -> ResolutionOutcome {
    if tx.kind == TxKind::Deletion || tx.get("deleted").and_then(|v| v.as_bool()) == Some(true) {
        return ResolutionOutcome::Empty;
    }
    let key = |name| tx.text(name).and_then(|s| s.parse::<KeyId>().ok());
    match (key("auth"), key("assert")) {
        (Some(auth), Some(assert)) => ResolutionOutcome::Document(DidDocument { id: did.clone(), auth, assert }),
        _ => ResolutionOutcome::Empty,
    }
}
