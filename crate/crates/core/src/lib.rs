pub mod cli;
pub mod densities;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod mle;
pub mod parallel;
pub mod params;
pub mod quad;
pub mod sampling;
pub mod special;
pub mod stats;
pub mod validation;
