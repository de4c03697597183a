pub mod bench;
pub mod convert;
pub mod enrich;
pub mod report;
pub mod seal;
pub mod validate;
pub mod verify;
