pub mod bench;
pub mod discover;
pub mod fetch;
pub mod ownership;
pub mod pki;
pub mod report;
pub mod validate;
