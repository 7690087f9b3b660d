pub mod molgraph;
pub mod hashing;
pub mod fingerprint;
pub mod transport;
pub mod evaluate;
pub mod tools;
pub mod buffer;
pub mod orchestrate;
pub mod metrics;
pub mod testbed;
pub mod pipeline;
