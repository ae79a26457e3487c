pub mod apkcheck;
pub mod bench;
pub mod api;
pub mod castore;
pub mod gateway;
pub mod hash;
pub mod ledger;
pub mod market;
pub mod registry;
pub mod testkit;
