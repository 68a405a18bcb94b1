//! Chain layer: location sets recorded as `τ_l` transactions.

use super::{LocationSet, StorageError};
use crate::canonical;
use crate::crypto::{decrypt_bytes, CryptoProvider, DecryptionKey, EncryptionKey, WalletAddress};
use crate::ledger::{Ledger, PropValue, Transaction, TxDraft, TxKind};

/// Finalizes a `τ_l` carrying `locations`.
///
/// With a key, the location list is sealed and stored as a single opaque
/// byte property so the transaction reveals nothing about where the
/// partitions live.
pub fn record_locations(
    ledger: &Ledger,
    provider: &dyn CryptoProvider,
    owner: &WalletAddress,
    locations: &LocationSet,
    encrypt_with: Option<EncryptionKey<'_>>,
) -> Result<Transaction, StorageError> {
    let handles: Vec<String> = locations.iter().map(ToString::to_string).collect();
    let mut draft = TxDraft::new(TxKind::Location, owner.clone()).with("owner", PropValue::text(owner.as_str()));
    draft = match encrypt_with {
        None => draft.with("locations", PropValue::List(handles)),
        Some(key) => {
            let plain = canonical::to_bytes(&handles).expect("strings always serialize");
            let sealed = provider.encrypt(&plain, key).to_bytes();
            draft.with("locations", PropValue::Bytes(sealed)).with("sealed", PropValue::Bool(true))
        }
    };
    let result = ledger.submit(draft)?;
    if !result.finalized {
        return Err(StorageError::LedgerRejection(result));
    }
    Ok(ledger.get(result.transaction_id).expect("finalized transactions are retrievable"))
}

/// Inverse of [`record_locations`]. A sealed record needs the matching key.
pub fn parse_locations(tx: &Transaction, key: Option<DecryptionKey<'_>>) -> Result<LocationSet, StorageError> {
    if tx.kind != TxKind::Location {
        return Err(StorageError::WrongTransactionKind(tx.kind));
    }
    let handles: Vec<String> = match tx.get("locations") {
        Some(PropValue::List(items)) => items.clone(),
        Some(PropValue::Bytes(sealed)) => {
            let key = key.ok_or(StorageError::DecryptionFailure)?;
            let plain = decrypt_bytes(sealed, key).map_err(|_| StorageError::DecryptionFailure)?;
            canonical::from_slice(&plain).map_err(|e| StorageError::MalformedLocations(e.to_string()))?
        }
        _ => return Err(StorageError::MalformedLocations("no location list".into())),
    };
    handles.iter().map(|h| h.parse()).collect::<Result<_, _>>().map(LocationSet)
}
