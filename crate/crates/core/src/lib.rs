pub mod canonical;
pub mod cli;
pub mod aggregator;
pub mod crypto;
pub mod identity;
pub mod ledger;
pub mod netsim;
pub mod storage;
