//! Alternative itinerary recommendation: POI graph embeddings, a
//! source/destination-conditioned forward/backward LSTM pair, LSTM and
//! sampling based itinerary generation, and popularity/diversity metrics.

pub mod dataset;
pub mod hash;
pub mod optim;
pub mod poigraph;
pub mod itrnet;
pub mod fixtures;
pub mod sampler;
pub mod planner;
pub mod metrics;
pub mod eval;
pub mod bundle;
