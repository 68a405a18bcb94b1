use serde::{Deserialize, Serialize};

use crate::aggregator::{Address, Message};
use crate::identity::Did;

/// What a scripted adversary does.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum AdversaryAction {
    /// The source alters its credential before sealing it.
    TamperVc,
    /// The source ships substituted data under its credential.
    ForgeClaim,
    /// The source presents an approval for a different nonce (off-chain).
    ReplayOmega,
    /// The source signs with a key that is not its DID's.
    ImpersonateDid,
    /// The source delivers with no authority approval at all.
    SkipApproval,
    /// The source asks an authority that did not issue its credential.
    WrongApprover { authority: String },
    /// Every protocol message the target sends at `step` is lost. Abort
    /// notices still get through so the consumer learns why.
    DropMessage { step: u8 },
    /// Staged data of the target source is damaged on its way to the consumer.
    CorruptPartition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryScript {
    /// Entity name the action applies to.
    pub target: String,
    #[serde(flatten)]
    pub action: AdversaryAction,
}

/// A fault applied by the network itself, with names already resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NetworkFault {
    Drop { sender: Address, step: u8 },
    Corrupt { source: Did },
}

impl NetworkFault {
    /// Rewrites `msg` in place; `Err` means the message is lost.
    pub fn apply(&self, from: &Address, step: u8, msg: &mut Message) -> Result<(), String> {
        match self {
            NetworkFault::Drop { sender, step: s }
                if sender == from && *s == step && !matches!(msg, Message::Abort { .. }) =>
            {
                Err(format!("dropped at step {step}"))
            }
            NetworkFault::Corrupt { source } => {
                if let Message::StageData { source: s, bytes: Some(bytes), .. } = msg {
                    if s == source && !bytes.is_empty() {
                        let mid = bytes.len() / 2;
                        bytes[mid] ^= 0x5a;
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

pub fn apply_all(faults: &[NetworkFault], from: &Address, step: u8, msg: &mut Message) -> Result<(), String> {
    faults.iter().try_for_each(|f| f.apply(from, step, msg))
}
