pub mod agreement;
pub mod corpus;
pub mod dataset;
pub mod exec;
pub mod export;
pub mod patterns;
pub mod stats;
